#include "san/sant_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "san/errors.hpp"

namespace san {

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_sant(std::ostream& out, const Tensor& tensor) {
  nlohmann::json header;
  header["shape"] = tensor.shape();
  header["dtype"] = "f32";
  header["order"] = "row-major";
  out << header.dump() << '\n';
  for (double v : tensor.values()) {
    const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.write(bytes, 4);
  }
  if (!out) throw FormatError("failed writing .sant payload");
}

void write_sant(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_sant(out, tensor);
}

Tensor read_sant(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(".sant: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string(".sant: header is not JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("shape") || !header["shape"].is_array())
    throw FormatError(".sant: header lacks a shape array");
  if (header.value("dtype", "") != "f32") throw FormatError(".sant: dtype must be \"f32\"");
  if (header.value("order", "") != "row-major") throw FormatError(".sant: order must be \"row-major\"");

  Shape shape;
  for (const auto& d : header["shape"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
      throw FormatError(".sant: shape entries must be positive integers");
    shape.push_back(d.get<std::size_t>());
  }
  if (shape.empty()) throw FormatError(".sant: empty shape");

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t count = shape_product(shape);
  if (payload.size() != count * 4)
    throw FormatError(".sant: payload holds " + std::to_string(payload.size()) + " bytes, shape " +
                      shape_string(shape) + " needs " + std::to_string(count * 4));

  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, payload.data() + 4 * i, 4);
    values[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(bits)));
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor read_sant(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_sant(in);
}

}  // namespace san
