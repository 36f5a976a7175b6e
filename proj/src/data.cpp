// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxIoError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

struct IdxFile {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
  std::size_t payload_offset = 0;
};

IdxFile parse_idx(const std::filesystem::path& path, std::uint32_t magic) {
  IdxFile f;
  f.bytes = read_file(path);
  if (f.bytes.size() < 4) throw IdxTruncatedError(path.string() + ": shorter than the 4-byte magic number");
  const std::uint32_t found = read_be32(f.bytes, 0);
  if (found != magic) {
    std::ostringstream os;
    os << path.string() << ": bad magic 0x" << std::hex << found << ", expected 0x" << magic;
    throw IdxMagicError(os.str());
  }
  const std::size_t ndims = magic & 0xff;
  f.payload_offset = 4 + 4 * ndims;
  if (f.bytes.size() < f.payload_offset) throw IdxTruncatedError(path.string() + ": truncated header");
  std::size_t expected = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    f.dims.push_back(read_be32(f.bytes, 4 + 4 * d));
    expected *= f.dims.back();
  }
  if (f.bytes.size() - f.payload_offset < expected) {
    throw IdxTruncatedError(path.string() + ": payload has " + std::to_string(f.bytes.size() - f.payload_offset) +
                            " bytes, dimensions announce " + std::to_string(expected));
  }
  return f;
}

std::vector<std::size_t> even_split_sizes(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++sizes[i];
  return sizes;
}

ClientPartition split_by_sizes(const std::vector<std::size_t>& order, const std::vector<std::size_t>& sizes) {
  ClientPartition p;
  p.clients.reserve(sizes.size());
  std::size_t cursor = 0;
  for (auto s : sizes) {
    p.clients.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                           order.begin() + static_cast<std::ptrdiff_t>(cursor + s));
    cursor += s;
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

void validate(const Dataset& dataset) {
  require(dataset.size() >= 1, "dataset is empty");
  require(dataset.inputs.rank() == 2 && dataset.inputs.rows() == dataset.size(),
          "dataset inputs/labels length mismatch");
  for (int label : dataset.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= dataset.num_classes)
      throw ContractError("dataset label " + std::to_string(label) + " out of range");
  }
  for (float v : dataset.inputs.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("dataset inputs must lie in [0, 1]");
  }
}

Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  require(!indices.empty(), "gather_batch: no indices");
  const std::size_t dim = dataset.input_dim();
  std::vector<float> data(indices.size() * dim);
  std::vector<int> labels(indices.size());
  const auto src = dataset.inputs.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t idx = indices[r];
    if (idx >= dataset.size()) throw ContractError("gather_batch: index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx * dim), dim,
                data.begin() + static_cast<std::ptrdiff_t>(r * dim));
    labels[r] = dataset.labels[idx];
  }
  return {Tensor({indices.size(), dim}, std::move(data)), std::move(labels)};
}

Batch as_batch(const Dataset& dataset) { return {dataset.inputs, dataset.labels}; }

// ---------------------------------------------------------------------------

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const IdxFile images = parse_idx(images_path, kIdxImagesMagic);
  const IdxFile labels = parse_idx(labels_path, kIdxLabelsMagic);
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    throw IdxCountMismatchError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                                std::to_string(labels.dims[0]) + " labels");
  }
  if (n == 0) throw IdxTruncatedError(images_path.string() + ": contains no images");
  const std::size_t dim = std::size_t{images.dims[1]} * images.dims[2];
  require(dim >= 1, "IDX images have zero pixels");

  std::vector<float> pixels(n * dim);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<float>(images.bytes[images.payload_offset + i]) / 255.0f;

  Dataset ds;
  ds.inputs = Tensor({n, dim}, std::move(pixels));
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels.bytes[labels.payload_offset + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  return ds;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
  require(rows >= 1 && cols >= 1 && pixels.size() % (rows * cols) == 0, "write_idx_images: bad dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxIoError("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IdxIoError("failed writing " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxIoError("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!out) throw IdxIoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

Dataset synth_dataset(const RngStream& stream, std::size_t n_per_class, std::size_t num_classes,
                      std::size_t input_dim, const SynthOptions& options) {
  require(n_per_class >= 1 && num_classes >= 1 && input_dim >= 1, "synth_dataset: all sizes must be >= 1");
  require(options.noise >= 0.0f && options.separation >= 0.0f, "synth_dataset: negative noise or separation");
  require(options.active_fraction > 0.0f && options.active_fraction <= 1.0f,
          "synth_dataset: active_fraction must be in (0, 1]");

  RngGenerator center_gen(stream.child("centers"));
  std::vector<double> canvas(input_dim);
  std::vector<bool> active(input_dim);
  for (std::size_t d = 0; d < input_dim; ++d) {
    active[d] = center_gen.next_double() < options.active_fraction;
    canvas[d] = active[d] ? 0.3 + 0.4 * center_gen.next_double() : -0.5;
  }
  std::vector<double> centers(num_classes * input_dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t d = 0; d < input_dim; ++d) {
      const double offset = active[d] ? options.separation * (2.0 * center_gen.next_double() - 1.0) : 0.0;
      centers[c * input_dim + d] = canvas[d] + offset;
    }
  }

  const std::size_t n = n_per_class * num_classes;
  RngGenerator gen(stream.child("examples"));
  std::vector<float> inputs(n * input_dim);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % num_classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t d = 0; d < input_dim; ++d) {
      const double v = centers[c * input_dim + d] + options.noise * gen.normal();
      inputs[i * input_dim + d] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  Dataset ds;
  ds.inputs = Tensor({n, input_dim}, std::move(inputs));
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  return ds;
}

Dataset take_prefix(const Dataset& dataset, std::size_t n) {
  require(n >= 1 && n <= dataset.size(), "take_prefix: n out of range");
  const std::size_t dim = dataset.input_dim();
  const auto src = dataset.inputs.data();
  Dataset out;
  out.inputs = Tensor({n, dim}, std::vector<float>(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n * dim)));
  out.labels.assign(dataset.labels.begin(), dataset.labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.num_classes = dataset.num_classes;
  return out;
}

// ---------------------------------------------------------------------------

std::size_t ClientPartition::total_size() const {
  std::size_t total = 0;
  for (const auto& c : clients) total += c.size();
  return total;
}

void validate(const ClientPartition& partition, std::size_t dataset_size) {
  require(partition.num_clients() >= 1, "partition has no clients");
  std::vector<bool> seen(dataset_size, false);
  for (std::size_t k = 0; k < partition.num_clients(); ++k) {
    require(!partition.clients[k].empty(), "client " + std::to_string(k) + " is empty");
    for (auto idx : partition.clients[k]) {
      if (idx >= dataset_size) throw ContractError("client " + std::to_string(k) + " holds out-of-range index");
      if (seen[idx]) throw ContractError("index " + std::to_string(idx) + " assigned to more than one client");
      seen[idx] = true;
    }
  }
}

ClientPartition partition_iid(const Dataset& dataset, std::size_t k, const RngStream& stream) {
  require(k >= 1 && k <= dataset.size(), "partition_iid: need 1 <= k <= N (k=" + std::to_string(k) +
                                             ", N=" + std::to_string(dataset.size()) + ")");
  return split_by_sizes(rng_shuffle(stream, dataset.size()), even_split_sizes(dataset.size(), k));
}

ClientPartition partition_label_skew(const Dataset& dataset, std::size_t k, const RngStream& stream) {
  const std::size_t classes = dataset.num_classes;
  require(classes >= 1, "partition_label_skew: dataset has no classes");
  require(k >= classes, "partition_label_skew: k=" + std::to_string(k) + " < num_classes=" +
                            std::to_string(classes) + " would force clients to hold several classes");

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (auto idx : rng_shuffle(stream, dataset.size()))
    by_class[static_cast<std::size_t>(dataset.labels[idx])].push_back(idx);

  ClientPartition p;
  p.clients.resize(k);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t owners = (k - c + classes - 1) / classes;  // |{i < k : i mod classes == c}|
    require(by_class[c].size() >= owners, "partition_label_skew: class " + std::to_string(c) + " has " +
                                              std::to_string(by_class[c].size()) + " examples for " +
                                              std::to_string(owners) + " clients");
    const auto sizes = even_split_sizes(by_class[c].size(), owners);
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < owners; ++j) {
      auto& client = p.clients[c + j * classes];
      client.assign(by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor),
                    by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor + sizes[j]));
      cursor += sizes[j];
    }
  }
  return p;
}

std::vector<std::size_t> geometric_sizes(std::size_t total, std::size_t k, double ratio) {
  require(k >= 1 && k <= total, "quantity skew: need 1 <= k <= N");
  require(ratio >= 1.0 && std::isfinite(ratio), "quantity skew: ratio must be >= 1");
  std::vector<double> weights(k, 1.0);
  if (k > 1)
    for (std::size_t i = 0; i < k; ++i) weights[i] = std::pow(ratio, static_cast<double>(i) / static_cast<double>(k - 1));
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

  std::vector<std::size_t> sizes(k);
  std::vector<double> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double target = static_cast<double>(total) * weights[i] / weight_sum;
    sizes[i] = static_cast<std::size_t>(std::floor(target));
    remainders[i] = target - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++sizes[order[i % k]];

  for (std::size_t i = 0; i < k; ++i)
    require(sizes[i] >= 1, "quantity skew: client " + std::to_string(i) + " would receive zero examples");
  return sizes;
}

ClientPartition partition_quantity_skew(const Dataset& dataset, std::size_t k, double ratio,
                                        const RngStream& stream) {
  const auto sizes = geometric_sizes(dataset.size(), k, ratio);
  return split_by_sizes(rng_shuffle(stream, dataset.size()), sizes);
}

std::vector<std::vector<std::size_t>> batch_indices(std::span<const std::size_t> client, std::size_t batch_size,
                                                    const RngStream& stream) {
  require(!client.empty(), "batches: client holds no examples");
  require(batch_size >= 1, "batches: batch size must be >= 1");
  std::vector<std::size_t> order(client.begin(), client.end());
  RngGenerator gen(stream);
  shuffle_in_place(order, gen);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

std::vector<Batch> batches(const Dataset& dataset, std::span<const std::size_t> client, std::size_t batch_size,
                           const RngStream& stream) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(client, batch_size, stream)) out.push_back(gather_batch(dataset, idx));
  return out;
}

// ---------------------------------------------------------------------------

std::size_t LabelHistogram::row_sum(std::size_t client) const {
  return std::accumulate(counts[client].begin(), counts[client].end(), std::size_t{0});
}

std::size_t LabelHistogram::nonzero_classes(std::size_t client) const {
  return static_cast<std::size_t>(
      std::count_if(counts[client].begin(), counts[client].end(), [](std::size_t c) { return c > 0; }));
}

LabelHistogram label_histogram(const Dataset& dataset, const ClientPartition& partition) {
  LabelHistogram h;
  h.num_classes = dataset.num_classes;
  h.counts.assign(partition.num_clients(), std::vector<std::size_t>(dataset.num_classes, 0));
  for (std::size_t k = 0; k < partition.num_clients(); ++k)
    for (auto idx : partition.clients[k]) ++h.counts[k][static_cast<std::size_t>(dataset.labels[idx])];
  return h;
}

std::string partition_jsonl(const LabelHistogram& histogram) {
  std::string out;
  for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
    nlohmann::ordered_json line;
    line["client_id"] = k;
    line["n_k"] = histogram.row_sum(k);
    line["label_counts"] = histogram.counts[k];
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_partition_jsonl(const std::filesystem::path& path, const LabelHistogram& histogram) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << partition_jsonl(histogram);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fedsim
