#include "samgpt/checkpoint.hpp"

#include "samgpt/error.hpp"
#include "samgpt/serialize.hpp"

namespace samgpt {

namespace fs = std::filesystem;

namespace {

std::string weight_name(int l) { return "encoder/W" + std::to_string(l); }
std::string structure_name(std::size_t i, int l) {
  return "structure/" + std::to_string(i) + "/" + std::to_string(l);
}
std::string feature_name(std::size_t i) { return "feature/" + std::to_string(i); }

}  // namespace

void Checkpoint::freeze() {
  encoder.freeze();
  for (auto& per_layer : structure.tokens)
    for (auto& t : per_layer) t.set_requires_grad(false);
  for (auto& t : features.tokens) t.set_requires_grad(false);
}

nlohmann::ordered_json Checkpoint::describe() const {
  nlohmann::ordered_json j;
  j["format"] = "samgpt-checkpoint-1";
  j["roster"] = roster;
  j["num_layers"] = encoder.num_layers();
  j["input_dim"] = encoder.config().input_dim;
  j["hidden_dim"] = encoder.config().hidden_dim;
  j["alpha"] = alpha;
  j["tau"] = tau;
  j["structure_tokens_trained"] = structure_tokens_trained;
  j["feature_alignment"] = "domain feature tokens (in-repo)";
  j["pretrain"] = pretrain_config;
  return j;
}

std::vector<std::pair<std::string, const Matrix*>> Checkpoint::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (int l = 0; l < encoder.num_layers(); ++l)
    out.emplace_back(weight_name(l), &encoder.weights()[static_cast<std::size_t>(l)].value());
  for (std::size_t i = 0; i < structure.tokens.size(); ++i)
    for (int l = 0; l < encoder.num_layers(); ++l)
      out.emplace_back(structure_name(i, l), &structure.tokens[i][static_cast<std::size_t>(l)].value());
  for (std::size_t i = 0; i < features.tokens.size(); ++i)
    out.emplace_back(feature_name(i), &features.tokens[i].value());
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  if (ckpt.structure.tokens.size() != ckpt.roster.size() || ckpt.features.tokens.size() != ckpt.roster.size())
    throw ShapeError("save_checkpoint: token sets do not match the roster");
  save_tensor_dir(dir, ckpt.named_tensors(), ckpt.describe());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  TensorDir td(dir);
  const auto& m = td.manifest();
  Checkpoint c;
  try {
    if (m.value("format", "") != "samgpt-checkpoint-1") throw LoadError(dir.string() + ": not a checkpoint");
    c.roster = m.at("roster").get<std::vector<std::string>>();
    EncoderConfig cfg;
    cfg.num_layers = m.at("num_layers").get<int>();
    cfg.input_dim = m.at("input_dim").get<Index>();
    cfg.hidden_dim = m.at("hidden_dim").get<Index>();
    c.alpha = m.at("alpha").get<double>();
    c.tau = m.at("tau").get<double>();
    c.structure_tokens_trained = m.at("structure_tokens_trained").get<bool>();
    c.pretrain_config = m.at("pretrain");
    std::vector<Tensor> weights;
    for (int l = 0; l < cfg.num_layers; ++l) weights.emplace_back(td.load(weight_name(l)));
    c.encoder = EncoderState::from_weights(cfg, std::move(weights));
    c.structure.tokens.resize(c.roster.size());
    for (std::size_t i = 0; i < c.roster.size(); ++i) {
      for (int l = 0; l < cfg.num_layers; ++l) {
        Matrix t = td.load(structure_name(i, l));
        if (t.rows() != 1 || t.cols() != c.encoder.in_dim(l))
          throw LoadError(dir.string() + ": structure token " + structure_name(i, l) + " has wrong width");
        c.structure.tokens[i].emplace_back(std::move(t));
      }
      Matrix f = td.load(feature_name(i));
      if (f.rows() != 1 || f.cols() != cfg.input_dim)
        throw LoadError(dir.string() + ": feature token " + feature_name(i) + " has wrong width");
      c.features.tokens.emplace_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(dir.string() + "/manifest.json: " + e.what());
  }
  c.freeze();
  return c;
}

std::string checkpoint_hash(const Checkpoint& ckpt) {
  std::string bytes = ckpt.describe().dump();
  for (const auto& [name, m] : ckpt.named_tensors()) {
    bytes += name;
    bytes += tensor_bytes(*m);
  }
  return sha256_hex(bytes);
}

}  // namespace samgpt
