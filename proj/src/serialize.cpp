#include "mdl/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian");

namespace mdl::serialize {

using nlohmann::json;

namespace {

constexpr char kDatasetMagic[4] = {'M', 'D', 'L', 'D'};
constexpr char kModelMagic[4] = {'M', 'D', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ostream& f, double v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_doubles(std::ostream& f, const double* p, std::size_t count) {
  f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

std::uint32_t get_u32(std::istream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t get_u64(std::istream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double get_f64(std::istream& f) {
  double v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void get_doubles(std::istream& f, double* p, std::size_t count) {
  f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

json descriptor_to_json(const ManifoldDescriptor& d) {
  json j;
  j["kind"] = to_string(d.kind);
  if (d.kind == ManifoldKind::sphere) {
    j["center"] = d.center_canonical;
    j["radius"] = d.radius;
  } else {
    j["mu_offset"] = d.mu_offset;
    j["inner"] = d.inner_parameterization;
    j["phi"] = {d.phi_lo, d.phi_hi};
    j["psi"] = {d.psi_lo, d.psi_hi};
  }
  return j;
}

ManifoldDescriptor descriptor_from_json(const json& j) {
  ManifoldDescriptor d;
  d.kind = manifold_kind_from_string(j.at("kind").get<std::string>());
  if (d.kind == ManifoldKind::sphere) {
    d.center_canonical = j.at("center").get<std::vector<double>>();
    d.radius = j.at("radius").get<double>();
  } else {
    d.mu_offset = j.at("mu_offset").get<double>();
    d.inner_parameterization = j.at("inner").get<bool>();
    d.phi_lo = j.at("phi")[0].get<double>();
    d.phi_hi = j.at("phi")[1].get<double>();
    d.psi_lo = j.at("psi")[0].get<double>();
    d.psi_hi = j.at("psi")[1].get<double>();
  }
  return d;
}

struct RawContainer {
  std::uint32_t m = 0, n = 0, c = 0, count = 0;
  Matrix points;
  std::vector<std::uint8_t> labels;
  json meta;
  Matrix targets;  // empty unless meta["targets_present"]
};

void write_container(const RawContainer& rc, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::data("cannot write " + path);
  f.write(kDatasetMagic, 4);
  put_u32(f, kVersion);
  put_u32(f, rc.m);
  put_u32(f, rc.n);
  put_u32(f, rc.c);
  put_u32(f, rc.count);
  put_doubles(f, rc.points.data(), rc.points.rows() * rc.points.cols());
  f.write(reinterpret_cast<const char*>(rc.labels.data()),
          static_cast<std::streamsize>(rc.labels.size()));
  const std::string meta = rc.meta.dump();
  put_u64(f, meta.size());
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  if (rc.meta.value("targets_present", false)) {
    put_doubles(f, rc.targets.data(), rc.targets.rows() * rc.targets.cols());
  }
  if (!f) throw Error::data("write failed: " + path);
}

RawContainer read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::dependency("missing artifact: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw Error::data(path + " is not a dataset container");
  }
  const std::uint32_t version = get_u32(f);
  if (version != kVersion) {
    throw Error::data(path + ": unsupported container version " + std::to_string(version));
  }
  RawContainer rc;
  rc.m = get_u32(f);
  rc.n = get_u32(f);
  rc.c = get_u32(f);
  rc.count = get_u32(f);
  rc.points = Matrix(rc.count, rc.n);
  get_doubles(f, rc.points.data(), std::size_t{rc.count} * rc.n);
  rc.labels.resize(rc.count);
  f.read(reinterpret_cast<char*>(rc.labels.data()), rc.count);
  const std::uint64_t meta_len = get_u64(f);
  std::string meta(meta_len, '\0');
  f.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!f) throw Error::data(path + ": truncated container");
  rc.meta = json::parse(meta);
  if (rc.meta.value("targets_present", false)) {
    rc.targets = Matrix(rc.count, rc.c);
    get_doubles(f, rc.targets.data(), std::size_t{rc.count} * rc.c);
    if (!f) throw Error::data(path + ": truncated target block");
  }
  return rc;
}

}  // namespace

void write_dataset(const LabeledDataset& ds, const std::string& path) {
  RawContainer rc;
  rc.m = static_cast<std::uint32_t>(ds.intrinsic_dim);
  rc.n = static_cast<std::uint32_t>(ds.ambient_dim);
  rc.c = static_cast<std::uint32_t>(ds.classes);
  rc.count = static_cast<std::uint32_t>(ds.size());
  rc.points = ds.points;
  rc.labels = ds.labels;

  json meta;
  meta["container"] = "dataset";
  meta["kind"] = ds.kind_name;
  meta["seed"] = ds.seed;
  meta["targets_present"] = false;
  json descs = json::array();
  for (const auto& d : ds.descriptors) descs.push_back(descriptor_to_json(d));
  meta["descriptors"] = descs;
  meta["embedding"] = {
      {"rotation", ds.embedding.rotation.values()},
      {"translation", ds.embedding.translation},
      {"cube_scale", ds.embedding.cube_scale},
      {"cube_offset", ds.embedding.cube_offset},
  };
  meta["canonical_params"] = ds.canonical_params;
  rc.meta = std::move(meta);
  write_container(rc, path);
}

LabeledDataset read_dataset(const std::string& path) {
  RawContainer rc = read_container(path);
  if (rc.meta.value("container", "") != "dataset") {
    throw Error::data(path + " does not hold a dataset");
  }
  LabeledDataset ds;
  ds.intrinsic_dim = rc.m;
  ds.ambient_dim = rc.n;
  ds.classes = rc.c;
  ds.points = std::move(rc.points);
  ds.labels = std::move(rc.labels);
  ds.kind_name = rc.meta.at("kind").get<std::string>();
  ds.seed = rc.meta.at("seed").get<std::uint64_t>();
  for (const auto& j : rc.meta.at("descriptors")) {
    ds.descriptors.push_back(descriptor_from_json(j));
  }
  const auto& emb = rc.meta.at("embedding");
  ds.embedding.rotation =
      Matrix(rc.n, rc.n, emb.at("rotation").get<std::vector<double>>());
  ds.embedding.translation = emb.at("translation").get<std::vector<double>>();
  ds.embedding.cube_scale = emb.at("cube_scale").get<double>();
  ds.embedding.cube_offset = emb.at("cube_offset").get<std::vector<double>>();
  ds.canonical_params =
      rc.meta.at("canonical_params").get<std::vector<std::vector<double>>>();
  ds.validate();
  return ds;
}

void write_training_set(const manifold::TrainingSet& ts, const LabeledDataset& origin,
                        const std::string& path) {
  RawContainer rc;
  rc.m = static_cast<std::uint32_t>(origin.intrinsic_dim);
  rc.n = static_cast<std::uint32_t>(ts.points.cols());
  rc.c = static_cast<std::uint32_t>(ts.classes);
  rc.count = static_cast<std::uint32_t>(ts.size());
  rc.points = ts.points;
  rc.labels = ts.labels;
  rc.targets = ts.targets;

  json meta;
  meta["container"] = "training_set";
  meta["kind"] = origin.kind_name;
  meta["seed"] = origin.seed;
  meta["targets_present"] = true;
  meta["on_manifold"] = ts.on_manifold;
  rc.meta = std::move(meta);
  write_container(rc, path);
}

manifold::TrainingSet read_training_set(const std::string& path) {
  RawContainer rc = read_container(path);
  if (rc.meta.value("container", "") != "training_set") {
    throw Error::data(path + " does not hold a training set");
  }
  manifold::TrainingSet ts;
  ts.points = std::move(rc.points);
  ts.targets = std::move(rc.targets);
  ts.labels = std::move(rc.labels);
  ts.classes = rc.c;
  ts.on_manifold = rc.meta.at("on_manifold").get<std::vector<std::uint8_t>>();
  if (ts.on_manifold.size() != ts.size() || ts.targets.rows() != ts.size()) {
    throw Error::data(path + ": inconsistent training set blocks");
  }
  return ts;
}

void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error::data("cannot write " + path);
  for (std::size_t j = 0; j < ds.ambient_dim; ++j) f << "x_" << j << ",";
  f << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.ambient_dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g,", ds.points(i, j));
      f << buf;
    }
    f << static_cast<int>(ds.labels[i]) << "\n";
  }
}

void write_checkpoint(const nn::Model& model, nn::ModelKind kind,
                      const std::string& meta_json, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::data("cannot write " + path);
  f.write(kModelMagic, 4);
  put_u32(f, kVersion);
  put_u32(f, static_cast<std::uint32_t>(kind));
  put_u32(f, static_cast<std::uint32_t>(model.cfg.input_dim));
  put_u32(f, static_cast<std::uint32_t>(model.cfg.classes));
  put_u32(f, static_cast<std::uint32_t>(model.cfg.width));
  put_f64(f, model.cfg.bn_epsilon);
  put_f64(f, model.cfg.bn_momentum);
  put_u32(f, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& ls : model.layers) {
    put_u32(f, ls.has_bn ? 1 : 0);
    put_u32(f, static_cast<std::uint32_t>(ls.in));
    put_u32(f, static_cast<std::uint32_t>(ls.out));
    put_u32(f, static_cast<std::uint32_t>(ls.branch + 1));
  }
  // parameter blocks in declaration order, running stats interleaved
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const auto& ls = model.layers[li];
    const auto& off = model.off[li];
    put_doubles(f, model.params.data() + off.w, ls.out * ls.in);
    put_doubles(f, model.params.data() + off.b, ls.out);
    if (ls.has_bn) {
      put_doubles(f, model.params.data() + off.gamma, ls.out);
      put_doubles(f, model.params.data() + off.beta, ls.out);
      put_doubles(f, model.running.data() + off.rmean, ls.out);
      put_doubles(f, model.running.data() + off.rvar, ls.out);
    }
  }
  put_u64(f, meta_json.size());
  f.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  if (!f) throw Error::data("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::dependency("missing artifact: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw Error::data(path + " is not a model checkpoint");
  }
  const std::uint32_t version = get_u32(f);
  if (version != kVersion) {
    throw Error::data(path + ": unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.kind = static_cast<nn::ModelKind>(get_u32(f));
  nn::ModelConfig cfg;
  cfg.input_dim = get_u32(f);
  cfg.classes = get_u32(f);
  cfg.width = get_u32(f);
  cfg.bn_epsilon = get_f64(f);
  cfg.bn_momentum = get_f64(f);
  cfg.head = ck.kind == nn::ModelKind::distance_learner ? nn::Head::distance
                                                        : nn::Head::classifier;
  ck.model = nn::Model(cfg);

  const std::uint32_t layer_count = get_u32(f);
  if (layer_count != ck.model.layers.size()) {
    throw Error::data(path + ": layer table does not match the architecture");
  }
  for (std::size_t li = 0; li < layer_count; ++li) {
    const auto& ls = ck.model.layers[li];
    const bool has_bn = get_u32(f) != 0;
    const std::uint32_t in = get_u32(f);
    const std::uint32_t out = get_u32(f);
    const std::uint32_t branch = get_u32(f);
    if (has_bn != ls.has_bn || in != ls.in || out != ls.out ||
        static_cast<int>(branch) != ls.branch + 1) {
      throw Error::data(path + ": layer table mismatch");
    }
  }
  for (std::size_t li = 0; li < layer_count; ++li) {
    const auto& ls = ck.model.layers[li];
    const auto& off = ck.model.off[li];
    get_doubles(f, ck.model.params.data() + off.w, ls.out * ls.in);
    get_doubles(f, ck.model.params.data() + off.b, ls.out);
    if (ls.has_bn) {
      get_doubles(f, ck.model.params.data() + off.gamma, ls.out);
      get_doubles(f, ck.model.params.data() + off.beta, ls.out);
      get_doubles(f, ck.model.running.data() + off.rmean, ls.out);
      get_doubles(f, ck.model.running.data() + off.rvar, ls.out);
    }
  }
  const std::uint64_t meta_len = get_u64(f);
  ck.meta_json.resize(meta_len);
  f.read(ck.meta_json.data(), static_cast<std::streamsize>(meta_len));
  if (!f) throw Error::data(path + ": truncated checkpoint");
  ck.model.train_mode = false;
  return ck;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::dependency("missing artifact: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    const std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace mdl::serialize
