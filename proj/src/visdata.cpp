// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/visdata.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace wstack {
namespace {

class LeWriter {
 public:
  template <typename T>
  void put(T value) {
    if constexpr (std::is_floating_point_v<T>) {
      using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
      put(std::bit_cast<U>(value));
    } else {
      auto u = static_cast<std::make_unsigned_t<T>>(value);
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf_.push_back(static_cast<char>(u & 0xffu));
        u = static_cast<decltype(u)>(u >> 8);
      }
    }
  }
  void put_bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void pad_to(std::size_t n) { buf_.resize(std::max(buf_.size(), n), '\0'); }
  const std::string& bytes() const { return buf_; }
  void clear() { buf_.clear(); }

 private:
  std::string buf_;
};

class LeReader {
 public:
  explicit LeReader(std::span<const char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if constexpr (std::is_floating_point_v<T>) {
      using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
      return std::bit_cast<T>(get<U>());
    } else {
      std::make_unsigned_t<T> u = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        u |= static_cast<decltype(u)>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
      }
      pos_ += sizeof(T);
      return static_cast<T>(u);
    }
  }
  void get_bytes(char* out, std::size_t n) {
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

void encode_header(LeWriter& w, const DatasetHeader& h) {
  w.put_bytes(h.magic.data(), 4);
  w.put(h.version);
  w.put(h.n_records);
  w.put(h.n_freq);
  w.put(h.n_corr);
  w.put(h.n_time_slices);
  w.put(h.w_min_native);
  w.put(h.w_max_native);
  w.put(h.prng_id);
  w.put(h.seed);
  w.put(h.uv_max_native);
  w.pad_to(kDatasetHeaderBytes);
}

DatasetHeader decode_header(std::span<const char> bytes) {
  LeReader r(bytes);
  DatasetHeader h;
  r.get_bytes(h.magic.data(), 4);
  h.version = r.get<std::uint32_t>();
  h.n_records = r.get<std::uint64_t>();
  h.n_freq = r.get<std::uint32_t>();
  h.n_corr = r.get<std::uint32_t>();
  h.n_time_slices = r.get<std::uint32_t>();
  h.w_min_native = r.get<double>();
  h.w_max_native = r.get<double>();
  h.prng_id = r.get<std::uint32_t>();
  h.seed = r.get<std::uint64_t>();
  h.uv_max_native = r.get<double>();
  return h;
}

std::ifstream open_dataset(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError("dataset not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  return in;
}

DatasetHeader read_checked_header(std::ifstream& in) {
  std::array<char, kDatasetHeaderBytes> buf{};
  in.read(buf.data(), buf.size());
  if (in.gcount() >= 4 && std::memcmp(buf.data(), kDatasetMagic.data(), 4) != 0) {
    throw IoError("bad magic");
  }
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated file");
  DatasetHeader h = decode_header(buf);
  if (h.version != kDatasetVersion) {
    throw IoError("version mismatch: file has " + std::to_string(h.version));
  }
  validate(h);
  return h;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

void validate(const DatasetHeader& h) {
  if (h.magic != kDatasetMagic) throw IoError("bad magic");
  if (h.n_records < 1) throw UsageError("header/record count mismatch: n_records must be >= 1");
  if (h.n_freq < 1 || h.n_corr < 1 || h.n_time_slices < 1) {
    throw UsageError("header counts n_freq, n_corr, n_time_slices must be >= 1");
  }
  if (!(h.w_min_native <= h.w_max_native)) throw UsageError("w_min_native > w_max_native");
}

void validate(const DatasetHeader& h, std::span<const VisRecord> records) {
  validate(h);
  if (h.n_records != records.size()) throw UsageError("header/record count mismatch");
  const std::size_t nc = h.channels();
  for (const VisRecord& r : records) {
    if (!(r.u >= 0.0 && r.u < 1.0 && r.v >= 0.0 && r.v < 1.0 && r.w >= 0.0 && r.w <= 1.0)) {
      throw UsageError("record coordinate outside normalized bounds");
    }
    if (r.vis.size() != nc || r.weight.size() != nc) {
      throw UsageError("record channel count does not match n_freq * n_corr");
    }
    if (r.time_index >= h.n_time_slices) throw UsageError("time_index >= n_time_slices");
    for (float wt : r.weight) {
      if (!std::isfinite(wt) || wt < 0.0f) throw UsageError("weights must be finite and >= 0");
    }
  }
}

void write_dataset(std::span<const VisRecord> records, const DatasetHeader& header,
                   const std::filesystem::path& path) {
  validate(header, records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  LeWriter w;
  encode_header(w, header);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  for (const VisRecord& r : records) {
    w.clear();
    w.put(r.u);
    w.put(r.v);
    w.put(r.w);
    w.put(r.time_index);
    for (const auto& z : r.vis) {
      w.put(z.real());
      w.put(z.imag());
    }
    for (float wt : r.weight) w.put(wt);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  }
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
  std::ifstream in = open_dataset(path);
  return read_checked_header(in);
}

Dataset read_dataset(const std::filesystem::path& path, ChunkSpec chunk) {
  std::ifstream in = open_dataset(path);
  const DatasetHeader file_header = read_checked_header(in);

  if (chunk.n_chunks < 1 || chunk.chunk_index >= chunk.n_chunks) {
    throw UsageError("chunk_index out of range");
  }
  Block channels{0, file_header.n_freq};
  Block slices{0, file_header.n_time_slices};
  if (chunk.axis == ChunkAxis::frequency) {
    if (chunk.n_chunks > file_header.n_freq) throw UsageError("more frequency chunks than channels");
    channels = balanced_block(file_header.n_freq, chunk.n_chunks, chunk.chunk_index);
  } else {
    if (chunk.n_chunks > file_header.n_time_slices) {
      throw UsageError("more time chunks than time slices");
    }
    slices = balanced_block(file_header.n_time_slices, chunk.n_chunks, chunk.chunk_index);
  }

  const std::size_t n_corr = file_header.n_corr;
  const std::size_t all_ch = file_header.channels();
  const std::size_t keep_lo = channels.start * n_corr;
  const std::size_t keep_n = channels.count * n_corr;

  Dataset out;
  out.header = file_header;
  out.header.n_freq = static_cast<std::uint32_t>(channels.count);
  out.first_channel = static_cast<std::uint32_t>(channels.start);

  std::vector<char> buf(file_header.record_bytes());
  for (std::uint64_t i = 0; i < file_header.n_records; ++i) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated file");
    LeReader r(buf);
    VisRecord rec;
    rec.u = r.get<double>();
    rec.v = r.get<double>();
    rec.w = r.get<double>();
    rec.time_index = r.get<std::uint32_t>();
    if (!slices.contains(rec.time_index)) continue;
    rec.vis.reserve(keep_n);
    rec.weight.reserve(keep_n);
    for (std::size_t c = 0; c < all_ch; ++c) {
      const float re = r.get<float>();
      const float im = r.get<float>();
      if (c >= keep_lo && c < keep_lo + keep_n) rec.vis.emplace_back(re, im);
    }
    for (std::size_t c = 0; c < all_ch; ++c) {
      const float wt = r.get<float>();
      if (c >= keep_lo && c < keep_lo + keep_n) rec.weight.push_back(wt);
    }
    out.records.push_back(std::move(rec));
  }
  out.header.n_records = out.records.size();
  return out;
}

std::vector<std::vector<VisRecord>> partition_time_ordered(std::span<const VisRecord> records,
                                                           std::size_t n_ranks,
                                                           std::uint32_t n_time_slices) {
  if (n_ranks < 1) throw UsageError("n_ranks must be >= 1");
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].time_index < records[i - 1].time_index) {
      throw UsageError("unsorted input: records must be in time order");
    }
  }
  std::vector<std::vector<VisRecord>> parts(n_ranks);
  for (const VisRecord& r : records) {
    if (r.time_index >= n_time_slices) throw UsageError("time_index >= n_time_slices");
    // With R > S the balanced rule gives one slice to each of the first S ranks.
    const std::size_t owners = std::min<std::size_t>(n_ranks, n_time_slices);
    parts[balanced_owner(n_time_slices, owners, r.time_index)].push_back(r);
  }
  return parts;
}

std::complex<double> sky_visibility(const SkyModel& sky, double u, double v, double w) {
  std::complex<double> acc{0.0, 0.0};
  for (const PointSource& s : sky.sources) {
    const double n = std::sqrt(1.0 - s.l * s.l - s.m * s.m);
    const double phase = -2.0 * kPi * (u * s.l + v * s.m + w * (n - 1.0));
    acc += (s.flux / n) * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc;
}

NativeUvw denormalize(const DatasetHeader& h, const VisRecord& r) {
  return {(2.0 * r.u - 1.0) * h.uv_max_native, (2.0 * r.v - 1.0) * h.uv_max_native,
          h.w_min_native + r.w * (h.w_max_native - h.w_min_native)};
}

Dataset generate_synthetic(const SkyModel& sky, std::uint64_t n_records, std::uint32_t n_freq,
                           std::uint64_t seed, const SyntheticOptions& opts) {
  if (sky.sources.empty()) throw UsageError("sky model has no sources");
  if (n_records < 1) throw UsageError("n_records must be >= 1");
  if (n_freq < 1 || opts.n_corr < 1 || opts.n_time_slices < 1) {
    throw UsageError("n_freq, n_corr and n_time_slices must be >= 1");
  }
  for (const PointSource& s : sky.sources) {
    if (!(s.l * s.l + s.m * s.m < 1.0)) throw UsageError("source with l^2 + m^2 >= 1");
  }
  if (!(opts.uv_fill > 0.0 && opts.uv_fill <= 1.0)) throw UsageError("uv_fill must be in (0, 1]");
  if (!(opts.uv_max > 0.0) || !(opts.w_min <= opts.w_max)) {
    throw UsageError("invalid native uv/w extents");
  }
  if (opts.hermitian) {
    if (n_records % 2 != 0) throw UsageError("hermitian generation needs an even record count");
    if (opts.w_min != -opts.w_max) throw UsageError("hermitian generation needs w_min = -w_max");
  }

  Dataset ds;
  DatasetHeader& h = ds.header;
  h.n_records = n_records;
  h.n_freq = n_freq;
  h.n_corr = opts.n_corr;
  h.n_time_slices = opts.n_time_slices;
  h.w_min_native = opts.w_min;
  h.w_max_native = opts.w_max;
  h.prng_id = kPrngMt19937_64;
  h.seed = seed;
  h.uv_max_native = opts.uv_max;

  std::mt19937_64 rng(seed);
  const std::size_t nc = h.channels();
  const std::uint64_t n_draws = opts.hermitian ? n_records / 2 : n_records;
  ds.records.reserve(n_records);
  for (std::uint64_t k = 0; k < n_draws; ++k) {
    VisRecord rec;
    rec.u = 0.5 + opts.uv_fill * (uniform01(rng) - 0.5);
    rec.v = 0.5 + opts.uv_fill * (uniform01(rng) - 0.5);
    rec.w = uniform01(rng);
    rec.time_index = static_cast<std::uint32_t>(k * opts.n_time_slices / n_draws);
    const NativeUvw x = denormalize(h, rec);
    const auto value = std::complex<float>(sky_visibility(sky, x.u, x.v, x.w));
    rec.vis.assign(nc, value);
    rec.weight.assign(nc, 1.0f);
    if (opts.hermitian) {
      VisRecord mirror = rec;
      mirror.u = 1.0 - rec.u;
      mirror.v = 1.0 - rec.v;
      mirror.w = 1.0 - rec.w;
      for (auto& z : mirror.vis) z = std::conj(z);
      ds.records.push_back(std::move(rec));
      ds.records.push_back(std::move(mirror));
    } else {
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace wstack
