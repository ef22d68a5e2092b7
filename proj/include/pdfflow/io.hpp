#pragma once

// Artifact output: atomic file replacement, CSV/JSON serialisation and the
// metadata sidecar written next to every artifact.

#include "pdfflow/invariants.hpp"
#include "pdfflow/types.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

namespace pdfflow::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Refused overwrite; callers map this to a configuration failure.
class OverwriteError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Writes `content` to a temporary sibling and renames it over `path`.
inline void write_atomic(const fs::path& path, const std::string& content, bool force)
{
    if (fs::exists(path) && !force)
        throw OverwriteError("refusing to overwrite " + path.string() + " (use --force)");
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!content.empty() && content.back() != '\n')
            out << '\n';
        out.flush();
        if (!out)
            throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " to " + path.string());
    }
}

/// JSON number or null for non-finite values. Doubles are emitted by the
/// serializer with round-trip precision.
inline json number(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

inline json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

inline json to_json(const VerificationReport& r)
{
    json j;
    j["name"] = r.name;
    j["value"] = number(r.value);
    j["tolerance"] = number(r.tolerance);
    j["status"] = to_string(r.status);
    j["assertable"] = r.assertable;
    json m = json::object();
    for (const auto& [k, v] : r.measured)
        m[k] = number(v);
    j["measured"] = m;
    json c = json::object();
    for (const auto& [k, v] : r.config)
        c[k] = v;
    j["config"] = c;
    j["notes"] = r.notes;
    return j;
}

inline json to_json(const std::vector<VerificationReport>& reports)
{
    json arr = json::array();
    for (const auto& r : reports)
        arr.push_back(to_json(r));
    return arr;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Sidecar path: d/name.csv -> d/name.meta.json.
inline fs::path meta_path(const fs::path& artifact)
{
    return artifact.parent_path() / (artifact.stem().string() + ".meta.json");
}

/// Writes an artifact and its metadata sidecar.
inline void write_with_meta(const fs::path& path, const std::string& content, const json& meta, bool force)
{
    const fs::path mp = meta_path(path);
    if (!force) {
        if (fs::exists(path))
            throw OverwriteError("refusing to overwrite " + path.string() + " (use --force)");
        if (fs::exists(mp))
            throw OverwriteError("refusing to overwrite " + mp.string() + " (use --force)");
    }
    write_atomic(path, content, force);
    write_atomic(mp, dump(meta), force);
}

} // namespace pdfflow::io
