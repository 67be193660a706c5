#include "hfe/config_file.hpp"

#include <fstream>
#include <map>
#include <set>
#include <type_traits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hfe/error.hpp"

namespace hfe {

namespace {

using boost::property_tree::ptree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"network",
       {"blocks", "channels", "sr_scale", "reduction", "edge_scales", "edge_trainable",
        "gate", "seed"}},
      {"train",
       {"batch_size", "patch_size", "base_lr", "lr_decay", "decay_every", "max_steps",
        "l1_weight", "hf_weight", "psnr_every", "seed"}},
      {"finetune",
       {"steps", "base_lr", "c", "threshold", "element_size", "sigma", "iterations"}},
  };
  return keys;
}

ptree parse_tree(const std::string& text, const std::set<std::string>& sections) {
  ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (!sections.count(section) || body.empty()) {
      throw ConfigError("config: unknown section or top-level key '" + section + "'");
    }
    const auto& allowed = known_keys().at(section);
    for (const auto& [key, value] : body) {
      if (!allowed.count(key)) {
        throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
  return tree;
}

template <typename T>
void read(const ptree& tree, const std::string& key, T& out) {
  const auto node = tree.get_child_optional(key);
  if (!node) return;
  const std::string raw = node->get_value<std::string>();
  if constexpr (std::is_same_v<T, bool>) {
    if (raw == "true" || raw == "1") {
      out = true;
    } else if (raw == "false" || raw == "0") {
      out = false;
    } else {
      throw ConfigError("config: " + key + " expects true/false, got '" + raw + "'");
    }
  } else {
    std::istringstream in(raw);
    T v{};
    if constexpr (std::is_unsigned_v<T>) {
      if (!raw.empty() && raw.front() == '-') {
        throw ConfigError("config: " + key + " must be non-negative");
      }
    }
    if (!(in >> v) || !(in >> std::ws).eof()) {
      throw ConfigError("config: cannot parse " + key + " = '" + raw + "'");
    }
    out = v;
  }
}

std::vector<std::size_t> parse_blocks(const std::string& raw) {
  std::vector<std::size_t> out;
  std::istringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream one(item);
    long long v = 0;
    if (!(one >> v) || !(one >> std::ws).eof() || v < 1) {
      throw ConfigError("config: network.blocks expects positive integers, got '" +
                        raw + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("config: network.blocks is empty");
  return out;
}

NetworkConfig network_from_tree(const ptree& tree) {
  NetworkConfig n;
  if (const auto b = tree.get_optional<std::string>("network.blocks")) {
    n.blocks_per_scale = parse_blocks(*b);
  }
  read(tree, "network.channels", n.channels);
  read(tree, "network.sr_scale", n.sr_scale);
  read(tree, "network.reduction", n.reduction);
  read(tree, "network.edge_scales", n.edge_scales);
  read(tree, "network.edge_trainable", n.edge_trainable);
  if (const auto g = tree.get_optional<std::string>("network.gate")) {
    n.gate = parse_gate(*g);
  }
  read(tree, "network.seed", n.seed);
  n.validate();
  return n;
}

std::string network_section(const NetworkConfig& n) {
  std::ostringstream out;
  out << "[network]\nblocks = ";
  for (std::size_t i = 0; i < n.blocks_per_scale.size(); ++i) {
    out << (i ? "," : "") << n.blocks_per_scale[i];
  }
  out << "\nchannels = " << n.channels << "\nsr_scale = " << n.sr_scale
      << "\nreduction = " << n.reduction << "\nedge_scales = " << n.edge_scales
      << "\nedge_trainable = " << (n.edge_trainable ? "true" : "false")
      << "\ngate = " << gate_name(n.gate) << "\nseed = " << n.seed << "\n";
  return out.str();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const ptree tree = parse_tree(text, {"network", "train", "finetune"});
  RunConfig rc;
  rc.network = network_from_tree(tree);
  TrainConfig& t = rc.train;
  read(tree, "train.batch_size", t.batch_size);
  read(tree, "train.patch_size", t.patch_size);
  read(tree, "train.base_lr", t.base_lr);
  read(tree, "train.lr_decay", t.lr_decay);
  read(tree, "train.decay_every", t.decay_every);
  read(tree, "train.max_steps", t.max_steps);
  read(tree, "train.l1_weight", t.weights.l1);
  read(tree, "train.hf_weight", t.weights.hf);
  read(tree, "train.psnr_every", t.psnr_every);
  read(tree, "train.seed", t.seed);
  read(tree, "finetune.steps", t.finetune.steps);
  read(tree, "finetune.base_lr", t.finetune.base_lr);
  read(tree, "finetune.c", t.finetune.mask.c);
  read(tree, "finetune.threshold", t.finetune.mask.threshold);
  read(tree, "finetune.element_size", t.finetune.mask.element_size);
  read(tree, "finetune.sigma", t.finetune.mask.sigma);
  read(tree, "finetune.iterations", t.finetune.mask.iterations);
  t.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot open config file");
  std::ostringstream text;
  text << f.rdbuf();
  return parse_run_config(text.str());
}

std::string network_config_to_ini(const NetworkConfig& config) {
  return network_section(config);
}

NetworkConfig network_config_from_ini(const std::string& text) {
  return network_from_tree(parse_tree(text, {"network"}));
}

std::string run_config_to_ini(const RunConfig& config) {
  const TrainConfig& t = config.train;
  std::ostringstream out;
  out.precision(17);
  out << network_section(config.network) << "\n[train]\nbatch_size = " << t.batch_size
      << "\npatch_size = " << t.patch_size << "\nbase_lr = " << t.base_lr
      << "\nlr_decay = " << t.lr_decay << "\ndecay_every = " << t.decay_every
      << "\nmax_steps = " << t.max_steps << "\nl1_weight = " << t.weights.l1
      << "\nhf_weight = " << t.weights.hf << "\npsnr_every = " << t.psnr_every
      << "\nseed = " << t.seed << "\n\n[finetune]\nsteps = " << t.finetune.steps
      << "\nbase_lr = " << t.finetune.base_lr << "\nc = " << t.finetune.mask.c
      << "\nthreshold = " << t.finetune.mask.threshold
      << "\nelement_size = " << t.finetune.mask.element_size
      << "\nsigma = " << t.finetune.mask.sigma
      << "\niterations = " << t.finetune.mask.iterations << "\n";
  return out.str();
}

}  // namespace hfe
