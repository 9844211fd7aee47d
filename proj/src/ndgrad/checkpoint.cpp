#include "mfsr/ndgrad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mfsr::ndgrad {

namespace {

static_assert(std::endian::native == std::endian::little, "archive writer assumes a little-endian host");

std::size_t element_bytes(Dtype dtype) { return dtype == Dtype::f32 ? 4 : 8; }

std::string shape_field(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "1" : s;
}

Shape parse_shape(const std::string& field) {
  Shape shape;
  std::stringstream ss(field);
  std::string part;
  while (std::getline(ss, part, ',')) shape.push_back(std::stoull(part));
  return shape;
}

}  // namespace

void write_archive(std::ostream& os, const std::vector<NamedArray>& arrays) {
  std::size_t offset = 0;
  for (const auto& [name, t] : arrays) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("archive array name '" + name + "' is empty or has whitespace");
    }
    os << name << ' ' << shape_field(t.shape()) << ' ' << to_string(t.dtype()) << ' ' << offset << '\n';
    offset += t.numel() * element_bytes(t.dtype());
  }
  os << '\n';
  for (const auto& [name, t] : arrays) {
    if (t.dtype() == Dtype::f32) {
      std::vector<float> buf(t.numel());
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t[i]);
      os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    } else {
      os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
    }
  }
  if (!os) throw std::runtime_error("failed writing archive");
}

std::vector<NamedArray> read_archive(std::istream& is) {
  struct Entry {
    std::string name;
    Shape shape;
    Dtype dtype;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    Entry e;
    std::string shape, dtype;
    if (!(ls >> e.name >> shape >> dtype >> e.offset)) {
      throw std::runtime_error("malformed archive header line: '" + line + "'");
    }
    e.shape = parse_shape(shape);
    e.dtype = parse_dtype(dtype);
    entries.push_back(std::move(e));
  }
  std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::vector<NamedArray> out;
  for (const Entry& e : entries) {
    const std::size_t n = numel(e.shape);
    const std::size_t bytes = n * element_bytes(e.dtype);
    if (e.offset + bytes > payload.size()) {
      throw std::runtime_error("archive payload truncated for array '" + e.name + "'");
    }
    std::vector<double> values(n);
    const char* src = payload.data() + e.offset;
    if (e.dtype == Dtype::f32) {
      for (std::size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, src + 4 * i, 4);
        values[i] = f;
      }
    } else {
      std::memcpy(values.data(), src, bytes);
    }
    out.emplace_back(e.name, Tensor(e.shape, std::move(values), e.dtype));
  }
  return out;
}

void save_archive(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_archive(os, arrays);
}

std::vector<NamedArray> load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive '" + path.string() + "'");
  return read_archive(is);
}

std::vector<NamedArray> export_parameters(const ParameterStore& store) {
  std::vector<NamedArray> out;
  for (const auto& p : store.all()) out.emplace_back(p->name, p->value);
  return out;
}

void import_parameters(ParameterStore& store, const std::vector<NamedArray>& arrays) {
  for (const auto& p : store.all()) {
    bool found = false;
    for (const auto& [name, t] : arrays) {
      if (name != p->name) continue;
      if (t.shape() != p->value.shape()) {
        throw ShapeError("checkpoint array '" + name + "' has shape " + to_string(t.shape()) +
                         ", model expects " + to_string(p->value.shape()));
      }
      p->value = t.astype(p->value.dtype());
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("checkpoint lacks parameter '" + p->name + "'");
  }
}

}  // namespace mfsr::ndgrad
