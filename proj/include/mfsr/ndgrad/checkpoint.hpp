#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mfsr/ndgrad/autograd.hpp"

namespace mfsr::ndgrad {

using NamedArray = std::pair<std::string, Tensor>;

// Archive layout: one UTF-8 header line per array,
//
//   <name> <d0,d1,...> <f32|f64> <byte_offset>
//
// then an empty line, then the little-endian payloads back to back. Offsets
// count from the first payload byte. Names may not contain whitespace.

void write_archive(std::ostream& os, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_archive(std::istream& is);

void save_archive(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_archive(const std::filesystem::path& path);

/// Every parameter (trainable or buffer) of the store, in registration order.
std::vector<NamedArray> export_parameters(const ParameterStore& store);
/// Copies values into same-named parameters. Missing names or shape
/// mismatches throw; arrays with unknown names are ignored.
void import_parameters(ParameterStore& store, const std::vector<NamedArray>& arrays);

}  // namespace mfsr::ndgrad
