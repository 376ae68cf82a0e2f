#include "fcnbc/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "fcnbc/json_config.hpp"

namespace fcnbc {

namespace fs = std::filesystem;

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'C', 'N', 'B', 'C', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_string(std::string& out, const std::string& s) {
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

template <typename Derived>
void put_array(std::string& out, const Eigen::DenseBase<Derived>& a) {
  for (Index i = 0; i < a.size(); ++i) detail::put<float>(out, a.derived().data()[i]);
}

template <typename Derived>
void get_array(detail::ByteReader& rd, Eigen::DenseBase<Derived>& a) {
  rd.get_floats(std::span<float>(a.derived().data(), static_cast<std::size_t>(a.size())));
}

}  // namespace

void save_checkpoint(const fs::path& path, const MSNet<float>& model, const AdamState<float>* adam,
                     const std::string& trainer_state) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, nlohmann::json(model.config()).dump());

  std::uint32_t layers = 0;
  for (const auto& bank : model.banks()) layers += static_cast<std::uint32_t>(bank.size());
  detail::put<std::uint32_t>(out, layers);
  for (const auto& bank : model.banks()) {
    for (const auto& c : bank) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.out_channels));
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.in_channels));
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.kernel));
    }
  }
  for (const auto& bank : model.banks()) {
    for (const auto& c : bank) {
      put_array(out, c.weights);
      put_array(out, c.bias);
    }
  }

  detail::put<std::uint8_t>(out, adam ? 1 : 0);
  if (adam) {
    detail::put<std::int64_t>(out, adam->step_count);
    detail::put<double>(out, adam->beta1);
    detail::put<double>(out, adam->beta2);
    detail::put<double>(out, adam->epsilon);
    detail::put<double>(out, adam->learning_rate);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(adam->m.size()));
    for (std::size_t i = 0; i < adam->m.size(); ++i) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(adam->m[i].size()));
      put_array(out, adam->m[i]);
      put_array(out, adam->v[i]);
    }
  }
  put_string(out, trainer_state);

  // Write next to the target and rename so a crash never leaves a torn file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string what = path.string();
  detail::ByteReader rd(bytes.data(), bytes.size(), what);
  if (rd.get_bytes(8) != std::string(kCheckpointMagic, 8)) throw FormatError(what + ": not a checkpoint file");
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  }

  MSNetConfig config;
  try {
    config = nlohmann::json::parse(rd.get_bytes(rd.get<std::uint32_t>())).get<MSNetConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": bad model config: " + e.what());
  }
  Checkpoint ck{MSNet<float>::build(config), std::nullopt, {}};

  std::vector<ConvSpec<float>*> convs;
  for (auto& bank : ck.model.banks()) {
    for (auto& c : bank) convs.push_back(&c);
  }
  const auto layers = rd.get<std::uint32_t>();
  if (layers != convs.size()) {
    throw FormatError(what + ": " + std::to_string(layers) + " layers stored, config describes " +
                      std::to_string(convs.size()));
  }
  for (auto* c : convs) {
    const auto o = rd.get<std::uint32_t>();
    const auto i = rd.get<std::uint32_t>();
    const auto k = rd.get<std::uint32_t>();
    if (o != c->out_channels || i != c->in_channels || k != c->kernel) {
      throw FormatError(what + ": layer shape does not match the stored config");
    }
  }
  for (auto* c : convs) {
    get_array(rd, c->weights);
    get_array(rd, c->bias);
  }

  if (rd.get<std::uint8_t>() != 0) {
    AdamState<float> a;
    a.step_count = rd.get<std::int64_t>();
    a.beta1 = rd.get<double>();
    a.beta2 = rd.get<double>();
    a.epsilon = rd.get<double>();
    a.learning_rate = rd.get<double>();
    const auto blocks = rd.get<std::uint32_t>();
    for (std::uint32_t b = 0; b < blocks; ++b) {
      const auto n = rd.get<std::uint32_t>();
      a.m.emplace_back(n);
      a.v.emplace_back(n);
      get_array(rd, a.m.back());
      get_array(rd, a.v.back());
    }
    ck.adam = std::move(a);
  }
  ck.trainer_state = rd.get_bytes(rd.get<std::uint32_t>());
  if (rd.remaining() != 0) throw FormatError(what + ": trailing bytes after checkpoint");
  return ck;
}

}  // namespace fcnbc
