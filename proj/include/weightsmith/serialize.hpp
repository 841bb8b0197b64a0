#pragma once

#include <string>

#include "weightsmith/encodings.hpp"
#include "weightsmith/sigmoid.hpp"
#include "weightsmith/transformer.hpp"

namespace weightsmith {

inline constexpr const char* kSchema = "weightsmith/v1";

/// JSON documents {"schema": "weightsmith/v1", "kind": ..., "value": ...}.
/// Doubles are written as 17-significant-digit strings so round trips are exact.
/// Any malformed or mismatched document throws SchemaError.
std::string to_json(const Matrix& m);
std::string to_json(const FunctionBlock& block);
std::string to_json(const CotPrompt& prompt);
std::string to_json(const FunctionTable& table);
std::string to_json(const VerificationReport& report);

Matrix matrix_from_json(const std::string& text);
FunctionBlock block_from_json(const std::string& text);
CotPrompt prompt_from_json(const std::string& text);
FunctionTable table_from_json(const std::string& text);

/// The "kind" field of a document.
std::string document_kind(const std::string& text);

std::string format_double(double x);
double parse_double(const std::string& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace weightsmith
