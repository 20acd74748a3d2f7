#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "evonet/rng.hpp"
#include "evonet/tensor.hpp"

namespace evonet {

enum class Split { kTrain, kValidation, kTest };
const char* to_string(Split split);

struct DatasetSpec {
  std::string name;
  int height = 32, width = 32, channels = 3;
  int num_classes = 10;
  size_t train_size = 0, val_size = 0, test_size = 0;
  std::string source_path;
  bool augment_enabled = false;
};

struct Batch {
  Tensor images;  // (batch, h, w, c), standardized
  std::vector<int> labels;
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FileNotFoundError : DatasetError {
  using DatasetError::DatasetError;
};
struct RecordCountMismatchError : DatasetError {
  using DatasetError::DatasetError;
};

/// Immutable in-memory dataset with hard train/validation/test split
/// boundaries. Test reads are counted so experiments can prove they never
/// touched the test split.
class Dataset {
 public:
  Dataset(DatasetSpec spec, std::vector<float> images[3],
          std::vector<int> labels[3]);

  const DatasetSpec& spec() const { return spec_; }
  size_t size(Split split) const;

  /// Gathers the given example indices into one batch.
  Batch gather(Split split, const std::vector<size_t>& indices) const;
  Batch example(Split split, size_t index) const;

  uint64_t test_access_count() const { return test_reads_.load(); }

 private:
  const std::vector<float>& images_of(Split split) const;
  const std::vector<int>& labels_of(Split split) const;

  DatasetSpec spec_;
  std::vector<float> train_images_, val_images_, test_images_;
  std::vector<int> train_labels_, val_labels_, test_labels_;
  mutable std::atomic<uint64_t> test_reads_{0};
};

enum class CifarVariant { kCifar10, kCifar100 };

struct CifarLoadOptions {
  // 0 means the full standard split (45,000 / 5,000 for cifar10).
  size_t train_subset = 0;
  size_t val_size = 5000;
  // The subset/holdout shuffle is fixed, independent of the experiment seed,
  // so different runs see identical splits.
  uint64_t split_seed = 0x5eed5eedull;
};

/// Reads the standard binary distribution (per record: 1 label byte, or
/// coarse+fine for cifar100, then 3072 channel-major pixel bytes). Pixels
/// are scaled to [0,1] and standardized per channel with statistics from
/// the final training split.
std::shared_ptr<Dataset> load_cifar(const std::filesystem::path& dir,
                                    CifarVariant variant,
                                    const CifarLoadOptions& options = {});

enum class SyntheticKind {
  kSeparable2,   // linearly separable, margin by construction
  kXorGrid,      // best linear accuracy is 0.75
  kKClassBlobs,  // k pattern centroids plus noise
  kGlyphs10,     // 10 glyph classes under affine jitter, 32x32x3
};

struct SyntheticOptions {
  int num_classes = 2;      // kKClassBlobs only
  size_t val_size = 0;      // defaults to size/5
  size_t test_size = 0;     // defaults to size/5
};

std::shared_ptr<Dataset> synthetic_dataset(SyntheticKind kind, size_t size,
                                           Rng& rng,
                                           const SyntheticOptions& options = {});

/// Writes a glyphs10 sample set as CIFAR-10-format binary files
/// (data_batch_1..5.bin, test_batch.bin) so the standard loader can ingest
/// it. Stand-in for environments where the real CIFAR data is not present.
void synthesize_cifar_format_glyphs(const std::filesystem::path& dir,
                                    size_t train_records, size_t test_records,
                                    uint64_t seed);

struct AugmentDraw {
  int dy = 0;  // crop offsets into the padded image, uniform over {0..2*pad}
  int dx = 0;
  bool flip = false;
};
AugmentDraw sample_augment(Rng& rng, int pad = 4);

/// Per image: zero-pad `pad` pixels each side, random crop back to the
/// original size, horizontal flip with probability 1/2. Training data only.
Batch augment(const Batch& batch, Rng& rng, int pad = 4);

}  // namespace evonet
