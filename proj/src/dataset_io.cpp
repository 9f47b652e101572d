#include "datom/dataset_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace datom {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagLabels = 1u;
constexpr std::uint32_t kFlagMasks = 2u;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("dataset: truncated binary header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

// Samples are stored at float32 precision in both forms; %.9g round-trips
// any float32 value exactly.
void put_sample_text(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(v)));
  os << buf;
}

}  // namespace

void write_dataset_text(std::ostream& os, const Dataset& ds) {
  ds.validate();
  const bool labels = ds.has_labels();
  const bool masks = ds.has_masks();
  os << "datom-dataset v1, T=" << ds.length() << ", n=" << ds.size() << ", labels=" << (labels ? 1 : 0)
     << ", masks=" << (masks ? 1 : 0) << "\n";
  for (int i = 0; i < ds.size(); ++i) {
    const Signal& x = ds.samples[i].signal;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (j) os << ',';
      put_sample_text(os, x(j));
    }
    if (labels) os << ',' << ds.samples[i].label;
    if (masks) {
      os << ',';
      for (auto m : ds.masks[i]) os << (m ? '1' : '0');
    }
    os << "\n";
  }
}

void write_dataset_binary(std::ostream& os, const Dataset& ds) {
  ds.validate();
  const bool labels = ds.has_labels();
  const bool masks = ds.has_masks();
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(ds.length()));
  put_u32(os, static_cast<std::uint32_t>(ds.size()));
  put_u32(os, (labels ? kFlagLabels : 0) | (masks ? kFlagMasks : 0));
  for (const auto& s : ds.samples)
    for (Eigen::Index j = 0; j < s.signal.size(); ++j) put_f32(os, static_cast<float>(s.signal(j)));
  if (labels)
    for (const auto& s : ds.samples) put_u32(os, static_cast<std::uint32_t>(s.label));
  if (masks)
    for (const auto& m : ds.masks) os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size()));
}

Dataset read_dataset_text(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw IoError("dataset: empty file");
  int t = -1, n = -1, labels = -1, masks = -1;
  if (std::sscanf(header.c_str(), "datom-dataset v1, T=%d, n=%d, labels=%d, masks=%d", &t, &n, &labels,
                  &masks) != 4)
    throw IoError("dataset: bad header: " + header);
  if (t < 1 || n < 1 || labels < 0 || labels > 1 || masks < 0 || masks > 1)
    throw IoError("dataset: bad header fields: " + header);

  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(n));
  std::string line;
  for (int i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw IoError("dataset: expected " + std::to_string(n) + " records");
    std::stringstream ss(line);
    std::string field;
    LabeledSample s;
    s.signal.resize(t);
    for (int j = 0; j < t; ++j) {
      if (!std::getline(ss, field, ','))
        throw IoError("dataset: record " + std::to_string(i) + " has too few samples");
      std::size_t pos = 0;
      s.signal(j) = std::stod(field, &pos);
      if (pos != field.size()) throw IoError("dataset: record " + std::to_string(i) + " bad sample value");
    }
    if (labels) {
      if (!std::getline(ss, field, ',')) throw IoError("dataset: record " + std::to_string(i) + " missing label");
      s.label = std::stoi(field);
    }
    if (masks) {
      if (!std::getline(ss, field, ',')) throw IoError("dataset: record " + std::to_string(i) + " missing mask");
      if (static_cast<int>(field.size()) != t)
        throw IoError("dataset: record " + std::to_string(i) + " mask length != T");
      NoiseMask m(static_cast<std::size_t>(t));
      for (int j = 0; j < t; ++j) {
        if (field[static_cast<std::size_t>(j)] != '0' && field[static_cast<std::size_t>(j)] != '1')
          throw IoError("dataset: record " + std::to_string(i) + " mask must be 0/1");
        m[static_cast<std::size_t>(j)] = field[static_cast<std::size_t>(j)] == '1';
      }
      ds.masks.push_back(std::move(m));
    }
    if (std::getline(ss, field, ','))
      throw IoError("dataset: record " + std::to_string(i) + " has trailing fields");
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

Dataset read_dataset_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("dataset: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) throw IoError("dataset: unsupported version " + std::to_string(version));
  const std::uint32_t t = get_u32(is);
  const std::uint32_t n = get_u32(is);
  const std::uint32_t flags = get_u32(is);
  if (t < 1 || n < 1) throw IoError("dataset: bad dimensions");
  if (flags & ~(kFlagLabels | kFlagMasks)) throw IoError("dataset: unknown flags");

  Dataset ds;
  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    s.signal.resize(t);
    for (std::uint32_t j = 0; j < t; ++j) s.signal(j) = static_cast<double>(get_f32(is));
  }
  if (flags & kFlagLabels)
    for (auto& s : ds.samples) s.label = static_cast<int>(get_u32(is));
  if (flags & kFlagMasks) {
    ds.masks.resize(n);
    for (auto& m : ds.masks) {
      m.resize(t);
      if (!is.read(reinterpret_cast<char*>(m.data()), t)) throw IoError("dataset: truncated masks");
      for (auto b : m)
        if (b > 1) throw IoError("dataset: mask bytes must be 0/1");
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("dataset: cannot open for writing: " + path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0)
    write_dataset_binary(os, ds);
  else
    write_dataset_text(os, ds);
  if (!os) throw IoError("dataset: write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("dataset: cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.clear();
  is.seekg(0);
  if (std::memcmp(magic, kMagic, 4) == 0) return read_dataset_binary(is);
  return read_dataset_text(is);
}

}  // namespace datom
