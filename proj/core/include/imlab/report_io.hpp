#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace imlab {

/// Shortest-but-stable float text: %.17g, enough digits to round-trip any
/// double bit-exactly and identical across runs.
std::string format_double(double value);

/// Deterministic JSON text: keys sorted (nlohmann objects already are),
/// floats rendered via format_double, two-space indent, trailing newline.
std::string canonical_json(const nlohmann::json& j);

/// Writes text to path, creating parent directories. Throws imlab::Error on
/// I/O failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace imlab
