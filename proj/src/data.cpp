#include "evonet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace evonet {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    default:
      return "test";
  }
}

Dataset::Dataset(DatasetSpec spec, std::vector<float> images[3],
                 std::vector<int> labels[3])
    : spec_(std::move(spec)),
      train_images_(std::move(images[0])),
      val_images_(std::move(images[1])),
      test_images_(std::move(images[2])),
      train_labels_(std::move(labels[0])),
      val_labels_(std::move(labels[1])),
      test_labels_(std::move(labels[2])) {
  spec_.train_size = train_labels_.size();
  spec_.val_size = val_labels_.size();
  spec_.test_size = test_labels_.size();
}

size_t Dataset::size(Split split) const {
  switch (split) {
    case Split::kTrain:
      return train_labels_.size();
    case Split::kValidation:
      return val_labels_.size();
    default:
      return test_labels_.size();
  }
}

const std::vector<float>& Dataset::images_of(Split split) const {
  if (split == Split::kTest) test_reads_.fetch_add(1);
  switch (split) {
    case Split::kTrain:
      return train_images_;
    case Split::kValidation:
      return val_images_;
    default:
      return test_images_;
  }
}

const std::vector<int>& Dataset::labels_of(Split split) const {
  switch (split) {
    case Split::kTrain:
      return train_labels_;
    case Split::kValidation:
      return val_labels_;
    default:
      return test_labels_;
  }
}

Batch Dataset::gather(Split split, const std::vector<size_t>& indices) const {
  const auto& images = images_of(split);
  const auto& labels = labels_of(split);
  const size_t example_size =
      size_t(spec_.height) * spec_.width * spec_.channels;
  Batch batch;
  batch.images =
      Tensor({int(indices.size()), spec_.height, spec_.width, spec_.channels});
  batch.labels.resize(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    const size_t idx = indices[i];
    std::copy(images.begin() + long(idx * example_size),
              images.begin() + long((idx + 1) * example_size),
              batch.images.data() + i * example_size);
    batch.labels[i] = labels[idx];
  }
  return batch;
}

Batch Dataset::example(Split split, size_t index) const {
  return gather(split, {index});
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileNotFoundError("missing file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

struct RawExamples {
  std::vector<float> images;  // NHWC in [0,1]
  std::vector<int> labels;
};

// One CIFAR record: label byte(s) then 3072 pixel bytes, channel-major
// (three 1024-byte planes, each row-major 32x32).
void parse_cifar_file(const std::filesystem::path& path, int label_bytes,
                      int num_classes, RawExamples& out) {
  const auto bytes = read_file(path);
  const size_t record = size_t(label_bytes) + 3072;
  if (bytes.empty() || bytes.size() % record != 0)
    throw RecordCountMismatchError(path.string() + ": file length " +
                                   std::to_string(bytes.size()) +
                                   " is not a whole number of records");
  const size_t count = bytes.size() / record;
  for (size_t r = 0; r < count; ++r) {
    const unsigned char* rec = bytes.data() + r * record;
    const int label = rec[label_bytes - 1];  // fine label for cifar100
    if (label >= num_classes)
      throw RecordCountMismatchError(path.string() + ": label out of range");
    out.labels.push_back(label);
    const unsigned char* px = rec + label_bytes;
    const size_t base = out.images.size();
    out.images.resize(base + 3072);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c)
          out.images[base + (size_t(y) * 32 + x) * 3 + c] =
              float(px[c * 1024 + y * 32 + x]) / 255.0f;
  }
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[size_t(rng.index(i))]);
  return idx;
}

void standardize_by_train(std::vector<float>* splits[3], int channels) {
  std::vector<double> mean(size_t(channels), 0.0), var(size_t(channels), 0.0);
  const std::vector<float>& train = *splits[0];
  const size_t count = train.size() / size_t(channels);
  for (size_t i = 0; i < train.size(); ++i)
    mean[i % size_t(channels)] += train[i];
  for (auto& m : mean) m /= double(count);
  for (size_t i = 0; i < train.size(); ++i) {
    const double d = train[i] - mean[i % size_t(channels)];
    var[i % size_t(channels)] += d * d;
  }
  for (auto& v : var) v = std::sqrt(v / double(count)) + 1e-8;
  for (int s = 0; s < 3; ++s)
    for (size_t i = 0; i < splits[s]->size(); ++i)
      (*splits[s])[i] = float(((*splits[s])[i] - mean[i % size_t(channels)]) /
                              var[i % size_t(channels)]);
}

std::shared_ptr<Dataset> build_from_raw(DatasetSpec spec, RawExamples train_raw,
                                        RawExamples test_raw,
                                        const CifarLoadOptions& options) {
  const size_t example_size =
      size_t(spec.height) * spec.width * spec.channels;
  const size_t total = train_raw.labels.size();
  if (options.val_size == 0 || options.val_size >= total)
    throw RecordCountMismatchError("validation split does not fit");
  size_t train_size = total - options.val_size;
  if (options.train_subset != 0) {
    if (options.train_subset > train_size)
      throw RecordCountMismatchError("train subset does not fit");
    train_size = options.train_subset;
  }

  const auto order = shuffled_indices(total, options.split_seed);
  std::vector<float> images[3];
  std::vector<int> labels[3];
  auto take = [&](int dst, size_t from, size_t n) {
    images[dst].reserve(n * example_size);
    labels[dst].reserve(n);
    for (size_t i = from; i < from + n; ++i) {
      const size_t src = order[i];
      images[dst].insert(
          images[dst].end(),
          train_raw.images.begin() + long(src * example_size),
          train_raw.images.begin() + long((src + 1) * example_size));
      labels[dst].push_back(train_raw.labels[src]);
    }
  };
  take(1, 0, options.val_size);
  take(0, options.val_size, train_size);
  images[2] = std::move(test_raw.images);
  labels[2] = std::move(test_raw.labels);

  std::vector<float>* split_ptrs[3] = {&images[0], &images[1], &images[2]};
  standardize_by_train(split_ptrs, spec.channels);
  return std::make_shared<Dataset>(std::move(spec), images, labels);
}

}  // namespace

std::shared_ptr<Dataset> load_cifar(const std::filesystem::path& dir,
                                    CifarVariant variant,
                                    const CifarLoadOptions& options) {
  DatasetSpec spec;
  spec.height = spec.width = 32;
  spec.channels = 3;
  spec.source_path = dir.string();
  spec.augment_enabled = true;

  RawExamples train_raw, test_raw;
  if (variant == CifarVariant::kCifar10) {
    spec.name = "cifar10";
    spec.num_classes = 10;
    for (int i = 1; i <= 5; ++i)
      parse_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), 1,
                       10, train_raw);
    parse_cifar_file(dir / "test_batch.bin", 1, 10, test_raw);
  } else {
    spec.name = "cifar100";
    spec.num_classes = 100;
    parse_cifar_file(dir / "train.bin", 2, 100, train_raw);
    parse_cifar_file(dir / "test.bin", 2, 100, test_raw);
  }
  return build_from_raw(std::move(spec), std::move(train_raw),
                        std::move(test_raw), options);
}

namespace {

// 5x7 digit bitmaps for the glyph fixture.
constexpr const char* kGlyphRows[10][7] = {
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}};

void render_glyph(float* px, int side, int channels, int digit, Rng& rng) {
  float bg[3], fg[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = float(rng.uniform(0.0, 0.45));
    fg[c] = float(rng.uniform(0.55, 1.0));
  }
  const double scale = rng.uniform(2.2, 3.8);
  const double theta = rng.uniform(-0.45, 0.45);
  const double cx = side / 2.0 + rng.uniform(-5.0, 5.0);
  const double cy = side / 2.0 + rng.uniform(-5.0, 5.0);
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);

  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      // Inverse-map the output pixel into glyph bitmap coordinates.
      const double rx = (x - cx), ry = (y - cy);
      const double gx = (cos_t * rx + sin_t * ry) / scale + 2.5;
      const double gy = (-sin_t * rx + cos_t * ry) / scale + 3.5;
      const int bx = int(std::floor(gx));
      const int by = int(std::floor(gy));
      const bool on = bx >= 0 && bx < 5 && by >= 0 && by < 7 &&
                      kGlyphRows[digit][by][bx] == '1';
      for (int c = 0; c < channels; ++c) {
        float v = on ? fg[c] : bg[c];
        v += float(0.06 * rng.normal());
        px[(size_t(y) * side + x) * channels + c] =
            std::clamp(v, 0.0f, 1.0f);
      }
    }
  }
}

}  // namespace

std::shared_ptr<Dataset> synthetic_dataset(SyntheticKind kind, size_t size,
                                           Rng& rng,
                                           const SyntheticOptions& options) {
  DatasetSpec spec;
  spec.augment_enabled = false;
  int side = 8, channels = 1, num_classes = 2;
  switch (kind) {
    case SyntheticKind::kSeparable2:
      spec.name = "separable2";
      break;
    case SyntheticKind::kXorGrid:
      spec.name = "xor_grid";
      break;
    case SyntheticKind::kKClassBlobs:
      spec.name = "k_class_blobs";
      num_classes = options.num_classes;
      break;
    case SyntheticKind::kGlyphs10:
      spec.name = "glyphs10";
      side = 32;
      channels = 3;
      num_classes = 10;
      break;
  }
  if (size < 10 * size_t(num_classes))
    throw DatasetError("synthetic dataset too small");
  spec.height = spec.width = side;
  spec.channels = channels;
  spec.num_classes = num_classes;

  const size_t val_size = options.val_size ? options.val_size : size / 5;
  const size_t test_size = options.test_size ? options.test_size : size / 5;
  const size_t total = size + val_size + test_size;
  const size_t example_size = size_t(side) * side * channels;

  // Class patterns for the pattern-based kinds.
  std::vector<float> patterns(size_t(num_classes) * example_size);
  for (auto& v : patterns) v = rng.coin() ? 1.0f : -1.0f;

  std::vector<float> all_images(total * example_size);
  std::vector<int> all_labels(total);
  for (size_t i = 0; i < total; ++i) {
    const int label = int(rng.index(uint64_t(num_classes)));
    all_labels[i] = label;
    float* px = all_images.data() + i * example_size;
    switch (kind) {
      case SyntheticKind::kSeparable2: {
        const float sign = label == 1 ? 1.0f : -1.0f;
        for (size_t j = 0; j < example_size; ++j)
          px[j] = 0.5f * sign * patterns[j] + float(rng.uniform(-0.1, 0.1));
        break;
      }
      case SyntheticKind::kXorGrid: {
        // Noiseless: b1 lights the left half, b2 the right; label b1 xor b2.
        const bool b1 = rng.coin();
        const bool b2 = b1 ^ (label == 1);
        for (int y = 0; y < side; ++y)
          for (int x = 0; x < side; ++x)
            px[size_t(y) * side + x] =
                (x < side / 2) ? (b1 ? 1.0f : 0.0f) : (b2 ? 1.0f : 0.0f);
        break;
      }
      case SyntheticKind::kKClassBlobs: {
        const float* p = patterns.data() + size_t(label) * example_size;
        for (size_t j = 0; j < example_size; ++j)
          px[j] = 0.6f * p[j] + float(0.35 * rng.normal());
        break;
      }
      case SyntheticKind::kGlyphs10: {
        render_glyph(px, side, channels, label, rng);
        break;
      }
    }
  }

  std::vector<float> images[3];
  std::vector<int> labels[3];
  auto take = [&](int dst, size_t from, size_t n) {
    images[dst].assign(all_images.begin() + long(from * example_size),
                       all_images.begin() + long((from + n) * example_size));
    labels[dst].assign(all_labels.begin() + long(from),
                       all_labels.begin() + long(from + n));
  };
  take(0, 0, size);
  take(1, size, val_size);
  take(2, size + val_size, test_size);
  return std::make_shared<Dataset>(std::move(spec), images, labels);
}

void synthesize_cifar_format_glyphs(const std::filesystem::path& dir,
                                    size_t train_records, size_t test_records,
                                    uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  auto write_records = [&](const std::filesystem::path& path, size_t count) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DatasetError("cannot write " + path.string());
    std::vector<float> px(32 * 32 * 3);
    std::vector<unsigned char> record(1 + 3072);
    for (size_t r = 0; r < count; ++r) {
      const int digit = int(rng.index(10));
      render_glyph(px.data(), 32, 3, digit, rng);
      record[0] = (unsigned char)(digit);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x)
            record[1 + size_t(c) * 1024 + size_t(y) * 32 + x] =
                (unsigned char)(std::lround(
                    px[(size_t(y) * 32 + x) * 3 + c] * 255.0f));
      f.write(reinterpret_cast<const char*>(record.data()),
              std::streamsize(record.size()));
    }
  };
  const size_t per_file = (train_records + 4) / 5;
  size_t remaining = train_records;
  for (int i = 1; i <= 5; ++i) {
    const size_t n = std::min(per_file, remaining);
    write_records(dir / ("data_batch_" + std::to_string(i) + ".bin"), n);
    remaining -= n;
  }
  write_records(dir / "test_batch.bin", test_records);
}

AugmentDraw sample_augment(Rng& rng, int pad) {
  AugmentDraw draw;
  draw.dy = int(rng.uniform_int(0, 2 * pad));
  draw.dx = int(rng.uniform_int(0, 2 * pad));
  draw.flip = rng.coin();
  return draw;
}

Batch augment(const Batch& batch, Rng& rng, int pad) {
  const int n = batch.images.dim(0);
  const int h = batch.images.dim(1);
  const int w = batch.images.dim(2);
  const int c = batch.images.dim(3);
  Batch out;
  out.images = Tensor({n, h, w, c});
  out.labels = batch.labels;
  for (int i = 0; i < n; ++i) {
    const AugmentDraw draw = sample_augment(rng, pad);
    for (int y = 0; y < h; ++y) {
      // Source row in the virtual zero-padded image; crop first, then flip.
      const int sy = y + draw.dy - pad;
      for (int x = 0; x < w; ++x) {
        const int cropped_x = draw.flip ? (w - 1 - x) : x;
        const int sx = cropped_x + draw.dx - pad;
        for (int ch = 0; ch < c; ++ch) {
          const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
          out.images.at4(i, y, x, ch) =
              inside ? batch.images.at4(i, sy, sx, ch) : 0.0f;
        }
      }
    }
  }
  return out;
}

}  // namespace evonet
