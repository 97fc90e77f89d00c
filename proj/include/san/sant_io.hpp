#pragma once

#include <filesystem>
#include <iosfwd>

#include "san/tensor.hpp"

namespace san {

// .sant container: one line of JSON {"shape":[...],"dtype":"f32","order":"row-major"},
// a newline, then exactly product(shape) little-endian float32 values.

void write_sant(std::ostream& out, const Tensor& tensor);
void write_sant(const std::filesystem::path& path, const Tensor& tensor);

/// Throws FormatError on a malformed header or a payload of the wrong length.
Tensor read_sant(std::istream& in);
Tensor read_sant(const std::filesystem::path& path);

}  // namespace san
