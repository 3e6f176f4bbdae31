#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "termctl/model.hpp"

namespace termctl {

using Json = nlohmann::ordered_json;

// ChainOutput as CSV: header `t,f1,...,fd`, t counting from 1, values with
// 17 significant digits.
void write_chain_csv(std::ostream& out, const ChainOutput& output);
void write_chain_csv(const std::string& path, const ChainOutput& output);
ChainOutput read_chain_csv(std::istream& in, std::string label = {});
ChainOutput read_chain_csv(const std::string& path);

// RegimeParams as JSON; the drift object carries "kind": "geometric" | "polynomial".
Json regime_to_json(const RegimeParams& params);
RegimeParams regime_from_json(const Json& j);
RegimeParams read_regime_file(const std::string& path);

std::string moment_class_name(MomentClass c);
MomentClass moment_class_from_name(const std::string& name);

Json matrix_to_json(const Matrix& m);

/// Serializes with fixed key order and every floating value printed with
/// 17 significant digits; non-finite numbers become null. Byte-stable for
/// equal inputs.
std::string dump_json(const Json& j, int indent = -1);

/// 17-significant-digit rendering shared by the CSV and JSON writers.
std::string format_double(double x);

}  // namespace termctl
