#pragma once

// Model graph: a shared convolutional encoder with an optional linear
// classifier head and any number of projector heads, plus checkpoint I/O.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "respscl/nn.h"

namespace respscl {

struct EncoderConfig {
  int n_blocks = 4;
  int kernel = 5;
  std::vector<int> channels{64, 128, 256, 512};
  GlobalPoolMode global_pool = GlobalPoolMode::MeanPlusMax;

  int embedding_dim() const { return channels.empty() ? 0 : channels.back(); }

  void validate() const {
    if (n_blocks < 1) {
      throw std::invalid_argument("model.blocks must be >= 1");
    }
    if (static_cast<int>(channels.size()) != n_blocks) {
      throw std::invalid_argument("model.channels must list one width per block");
    }
    for (int c : channels) {
      if (c <= 0) {
        throw std::invalid_argument("model.channels must be positive");
      }
    }
    if (kernel <= 0 || kernel % 2 == 0) {
      throw std::invalid_argument("model.kernel must be odd and positive");
    }
  }

  std::string arch_string() const {
    std::ostringstream os;
    os << "enc(blocks=" << n_blocks << ",k=" << kernel << ",ch=";
    for (size_t i = 0; i < channels.size(); ++i) {
      os << (i ? "-" : "") << channels[i];
    }
    os << ",pool=" << (global_pool == GlobalPoolMode::Mean ? "mean" : "mean_plus_max")
       << ")";
    return os.str();
  }
};

struct ProjectorConfig {
  int hidden_dim = 128;
  int out_dim = 128;
  bool l2_normalize_output = true;

  void validate() const {
    if (hidden_dim <= 0 || out_dim <= 0) {
      throw std::invalid_argument("projector dims must be positive");
    }
  }
  std::string arch_string() const {
    std::ostringstream os;
    os << "proj(h=" << hidden_dim << ",o=" << out_dim
       << ",l2=" << (l2_normalize_output ? 1 : 0) << ")";
    return os.str();
  }
};

// conv -> batch norm -> relu -> 2x2 average pool
template <typename T>
class ConvBlock {
 public:
  ConvBlock(int in_ch, int out_ch, int kernel) : conv_(in_ch, out_ch, kernel), bn_(out_ch) {}

  void init(Rng& rng) {
    conv_.init(rng);
    bn_.init_state();
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, int workers) {
    return pool_.forward(relu_.forward(bn_.forward(conv_.forward(x, workers), train, workers)));
  }
  Tensor<T> backward(const Tensor<T>& gout, int workers) {
    return conv_.backward(bn_.backward(relu_.backward(pool_.backward(gout)), workers), workers);
  }

  int64_t param_count() const { return conv_.param_count() + bn_.param_count(); }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    conv_.visit_params(prefix + ".conv", fn);
    bn_.visit_params(prefix + ".bn", fn);
  }
  void visit_state(const std::string& prefix,
                   const std::function<void(const std::string&, Tensor<T>*)>& fn) {
    bn_.visit_state(prefix + ".bn", fn);
  }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  Relu<T> relu_;
  AvgPool2<T> pool_;
};

template <typename T>
class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg) : cfg_(std::move(cfg)), pool_(cfg_.global_pool) {
    cfg_.validate();
    int in_ch = 1;
    for (int bidx = 0; bidx < cfg_.n_blocks; ++bidx) {
      blocks_.emplace_back(in_ch, cfg_.channels[static_cast<size_t>(bidx)], cfg_.kernel);
      in_ch = cfg_.channels[static_cast<size_t>(bidx)];
    }
  }

  void init(Rng& rng) {
    for (auto& b : blocks_) {
      b.init(rng);
    }
  }

  EMat<T> forward(const Tensor<T>& x, bool train, int workers) {
    if (x.rank() != 4 || x.dim(1) != 1) {
      throw std::invalid_argument("encoder: expected [B,1,H,W] input, got " +
                                  x.shape_str());
    }
    const int64_t min_extent = int64_t{1} << cfg_.n_blocks;
    if (x.dim(2) < min_extent || x.dim(3) < min_extent) {
      throw std::invalid_argument(
          "encoder: input " + x.shape_str() + " too small; both spatial dims must be >= " +
          std::to_string(min_extent) + " for " + std::to_string(cfg_.n_blocks) +
          " pooling blocks");
    }
    Tensor<T> h = x;
    for (auto& b : blocks_) {
      h = b.forward(h, train, workers);
    }
    forward_done_ = true;
    return pool_.forward(h);
  }

  Tensor<T> backward(const EMat<T>& demb, int workers) {
    if (!forward_done_) {
      throw std::runtime_error("encoder: backward called before forward");
    }
    Tensor<T> g = pool_.backward(demb);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      g = it->backward(g, workers);
    }
    return g;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& b : blocks_) {
      n += b.param_count();
    }
    return n;
  }

  const EncoderConfig& config() const { return cfg_; }

  void visit_params(const ParamVisitor<T>& fn) {
    for (size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit_params("encoder.block" + std::to_string(i), fn);
    }
  }
  void visit_state(const std::function<void(const std::string&, Tensor<T>*)>& fn) {
    for (size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit_state("encoder.block" + std::to_string(i), fn);
    }
  }

 private:
  EncoderConfig cfg_;
  std::vector<ConvBlock<T>> blocks_;
  GlobalPool<T> pool_;
  bool forward_done_ = false;
};

// One hidden layer MLP head mapping embeddings into the contrastive space.
template <typename T>
class Projector {
 public:
  Projector(int in_dim, ProjectorConfig cfg)
      : cfg_(cfg), fc1_(in_dim, cfg.hidden_dim), fc2_(cfg.hidden_dim, cfg.out_dim) {
    cfg_.validate();
  }

  void init(Rng& rng) {
    fc1_.init(rng);
    fc2_.init(rng);
  }

  EMat<T> forward(const EMat<T>& emb) {
    hidden_ = fc1_.forward(emb);
    mask_ = hidden_.array() > T{0};
    EMat<T> h = hidden_.cwiseMax(T{0});
    pre_norm_ = fc2_.forward(h);
    return cfg_.l2_normalize_output ? l2_.forward(pre_norm_) : pre_norm_;
  }

  EMat<T> backward(const EMat<T>& dz) {
    EMat<T> g = cfg_.l2_normalize_output ? l2_.backward(dz) : dz;
    g = fc2_.backward(g);
    g = (mask_.template cast<T>().array() * g.array()).matrix();
    return fc1_.backward(g);
  }

  const EMat<T>& pre_norm_output() const { return pre_norm_; }
  const ProjectorConfig& config() const { return cfg_; }
  int64_t param_count() const { return fc1_.param_count() + fc2_.param_count(); }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fc1_.visit_params(prefix + ".fc1", fn);
    fc2_.visit_params(prefix + ".fc2", fn);
  }

 private:
  ProjectorConfig cfg_;
  Linear<T> fc1_, fc2_;
  L2NormalizeRows<T> l2_;
  EMat<T> hidden_, pre_norm_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask_;
};

struct ModelConfig {
  EncoderConfig encoder;
  int n_classes = 0;  // 0 = no classifier head
  std::vector<ProjectorConfig> projectors;
  int workers = 0;  // 0 = hardware default

  std::string arch_string() const {
    std::ostringstream os;
    os << encoder.arch_string() << "|classes=" << n_classes;
    for (const auto& p : projectors) {
      os << "|" << p.arch_string();
    }
    return os.str();
  }
  uint64_t fingerprint() const { return fnv1a64(arch_string()); }
};

template <typename T>
class ModelGraph {
 public:
  explicit ModelGraph(ModelConfig cfg) : cfg_(std::move(cfg)), encoder_(cfg_.encoder) {
    workers_ = cfg_.workers > 0 ? cfg_.workers : default_workers();
    if (cfg_.n_classes > 0) {
      classifier_.emplace(cfg_.encoder.embedding_dim(), cfg_.n_classes);
    }
    for (const auto& pc : cfg_.projectors) {
      projectors_.emplace_back(cfg_.encoder.embedding_dim(), pc);
    }
  }

  void init(uint64_t seed) {
    Rng rng(derive_seed(seed, "model-init"));
    encoder_.init(rng);
    if (classifier_) {
      classifier_->init(rng);
    }
    for (auto& p : projectors_) {
      p.init(rng);
    }
  }

  EMat<T> encode(const Tensor<T>& x) { return encoder_.forward(x, train_mode_, workers_); }
  void encoder_backward(const EMat<T>& demb) {
    if (encoder_frozen_) {
      return;
    }
    encoder_.backward(demb, workers_);
  }

  EMat<T> classify(const EMat<T>& emb) {
    if (!classifier_) {
      throw std::runtime_error("model has no classifier head");
    }
    return classifier_->forward(emb);
  }
  EMat<T> classifier_backward(const EMat<T>& dlogits) {
    return classifier_->backward(dlogits);
  }

  EMat<T> project(size_t head, const EMat<T>& emb) {
    return projectors_.at(head).forward(emb);
  }
  EMat<T> projector_backward(size_t head, const EMat<T>& dz) {
    return projectors_.at(head).backward(dz);
  }

  void set_train(bool train) { train_mode_ = train; }
  bool train_mode() const { return train_mode_; }
  void set_encoder_frozen(bool frozen) { encoder_frozen_ = frozen; }
  bool encoder_frozen() const { return encoder_frozen_; }

  Encoder<T>& encoder() { return encoder_; }
  std::optional<Linear<T>>& classifier() { return classifier_; }
  std::vector<Projector<T>>& projectors() { return projectors_; }
  const ModelConfig& config() const { return cfg_; }
  int workers() const { return workers_; }

  int64_t param_count() const {
    int64_t n = encoder_.param_count();
    if (classifier_) {
      n += classifier_->param_count();
    }
    for (const auto& p : projectors_) {
      n += p.param_count();
    }
    return n;
  }

  // Visits trainable parameters in a stable order. Frozen-encoder graphs
  // still visit encoder tensors (their gradients simply stay zero).
  void visit_params(const ParamVisitor<T>& fn) {
    encoder_.visit_params(fn);
    if (classifier_) {
      classifier_->visit_params("classifier", fn);
    }
    for (size_t i = 0; i < projectors_.size(); ++i) {
      projectors_[i].visit_params("projector" + std::to_string(i), fn);
    }
  }
  void visit_state(const std::function<void(const std::string&, Tensor<T>*)>& fn) {
    encoder_.visit_state(fn);
  }

  void zero_grad() {
    visit_params([](const ParamRef<T>& p) { p.grad->set_zero(); });
  }

  // Order-stable hash over every parameter and state tensor.
  uint64_t weights_hash() {
    uint64_t h = 1469598103934665603ull;
    visit_params([&](const ParamRef<T>& p) {
      h = fnv1a64(p.value->ptr(), sizeof(T) * static_cast<size_t>(p.value->numel()), h);
    });
    visit_state([&](const std::string&, Tensor<T>* t) {
      h = fnv1a64(t->ptr(), sizeof(T) * static_cast<size_t>(t->numel()), h);
    });
    return h;
  }

 private:
  ModelConfig cfg_;
  Encoder<T> encoder_;
  std::optional<Linear<T>> classifier_;
  std::vector<Projector<T>> projectors_;
  int workers_ = 1;
  bool train_mode_ = true;
  bool encoder_frozen_ = false;
};

namespace detail {
template <typename T>
struct DtypeName;
template <>
struct DtypeName<float> {
  static constexpr const char* value = "f32";
};
template <>
struct DtypeName<double> {
  static constexpr const char* value = "f64";
};
}  // namespace detail

// Checkpoint directory layout: index.txt (version, fingerprint, step, dtype,
// one line per tensor) plus params.bin, a single little-endian blob.
template <typename T>
void save_checkpoint(ModelGraph<T>& model, const std::filesystem::path& dir,
                     int64_t step) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, Tensor<T>*>> tensors;
  model.visit_params([&](const ParamRef<T>& p) { tensors.emplace_back(p.name, p.value); });
  model.visit_state([&](const std::string& n, Tensor<T>* t) { tensors.emplace_back(n, t); });

  std::ofstream blob(dir / "params.bin", std::ios::binary | std::ios::trunc);
  std::ofstream index(dir / "index.txt", std::ios::trunc);
  if (!blob || !index) {
    throw std::runtime_error("cannot write checkpoint: " + dir.string());
  }
  index << "respscl.ckpt.v1\n";
  index << "fingerprint " << hex64(model.config().fingerprint()) << "\n";
  index << "step " << step << "\n";
  index << "dtype " << detail::DtypeName<T>::value << "\n";
  int64_t offset = 0;
  for (auto& [name, t] : tensors) {
    index << "tensor " << name;
    index << " " << t->rank();
    for (int64_t d : t->shape) {
      index << " " << d;
    }
    index << " " << offset << " " << t->numel() << "\n";
    blob.write(reinterpret_cast<const char*>(t->ptr()),
               static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t->numel())));
    offset += t->numel() * static_cast<int64_t>(sizeof(T));
  }
}

// Loads a checkpoint saved by save_checkpoint. With encoder_only=true, only
// "encoder.*" tensors are loaded (pretrained-backbone import); heads keep
// their current values. Returns the stored training step.
template <typename T>
int64_t load_checkpoint(ModelGraph<T>& model, const std::filesystem::path& dir,
                        bool encoder_only = false) {
  std::ifstream index(dir / "index.txt");
  if (!index) {
    throw std::runtime_error("cannot open checkpoint index: " + dir.string());
  }
  std::string magic;
  std::getline(index, magic);
  if (magic != "respscl.ckpt.v1") {
    throw std::runtime_error("corrupt checkpoint: bad magic in " + dir.string());
  }

  std::string fingerprint;
  int64_t step = 0;
  std::string dtype;
  struct Entry {
    std::vector<int64_t> shape;
    int64_t offset = 0;
    int64_t count = 0;
  };
  std::map<std::string, Entry> entries;

  std::string line;
  while (std::getline(index, line)) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "fingerprint") {
      is >> fingerprint;
    } else if (key == "step") {
      is >> step;
    } else if (key == "dtype") {
      is >> dtype;
    } else if (key == "tensor") {
      std::string name;
      int rank = 0;
      is >> name >> rank;
      Entry e;
      for (int i = 0; i < rank; ++i) {
        int64_t d = -1;
        is >> d;
        e.shape.push_back(d);
      }
      is >> e.offset >> e.count;
      if (!is || rank < 0 || e.count < 0) {
        throw std::runtime_error("corrupt checkpoint: bad tensor line in " + dir.string());
      }
      entries[name] = std::move(e);
    }
  }
  if (dtype != detail::DtypeName<T>::value) {
    throw std::runtime_error("checkpoint dtype " + dtype + " does not match model");
  }
  if (!encoder_only && fingerprint != hex64(model.config().fingerprint())) {
    throw std::runtime_error(
        "checkpoint fingerprint mismatch (pass encoder_only to import a backbone)");
  }

  std::ifstream blob(dir / "params.bin", std::ios::binary);
  if (!blob) {
    throw std::runtime_error("cannot open checkpoint blob: " + dir.string());
  }

  std::vector<std::string> missing, mismatched;
  auto load_tensor = [&](const std::string& name, Tensor<T>* t) {
    if (encoder_only && name.rfind("encoder.", 0) != 0) {
      return;
    }
    auto it = entries.find(name);
    if (it == entries.end()) {
      missing.push_back(name);
      return;
    }
    if (it->second.shape != t->shape) {
      mismatched.push_back(name);
      return;
    }
    blob.seekg(it->second.offset);
    blob.read(reinterpret_cast<char*>(t->ptr()),
              static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t->numel())));
    if (blob.gcount() !=
        static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t->numel()))) {
      throw std::runtime_error("corrupt checkpoint: truncated blob at tensor " + name);
    }
  };
  model.visit_params([&](const ParamRef<T>& p) { load_tensor(p.name, p.value); });
  model.visit_state([&](const std::string& n, Tensor<T>* t) { load_tensor(n, t); });

  if (!mismatched.empty() || !missing.empty()) {
    std::string msg = "checkpoint tensor mismatch:";
    for (const auto& n : mismatched) {
      msg += " shape(" + n + ")";
    }
    for (const auto& n : missing) {
      msg += " missing(" + n + ")";
    }
    throw std::runtime_error(msg);
  }
  return step;
}

}  // namespace respscl
