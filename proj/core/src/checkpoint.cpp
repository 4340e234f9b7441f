#include "intrin/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "intrin/util.hpp"

namespace intrin {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'I', 'L', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const NetworkConfig& c) {
  return json{{"resolution", c.resolution},
              {"levels", c.levels},
              {"base_channels", c.base_channels},
              {"channel_cap", c.channel_cap},
              {"variant", variant_name(c.variant)},
              {"bn_momentum", c.bn_momentum},
              {"bn_eps", c.bn_eps}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.resolution = j.at("resolution").get<int>();
  c.levels = j.at("levels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.channel_cap = j.at("channel_cap").get<int>();
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  return c;
}

void put_block(std::ostream& out, const std::vector<float>& v) {
  const std::uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(sizeof(float)) * std::streamsize(n));
}

std::vector<float> get_block(std::istream& in, std::size_t expect) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n != expect)
    throw std::runtime_error("checkpoint: block size mismatch (file corrupt or "
                             "config inconsistent)");
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(sizeof(float)) * std::streamsize(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, MirrorLinkNet<float>& net,
                     const AdamState<float>* optimizer) {
  json header;
  header["config"] = config_to_json(net.config());
  header["frozen_encoder"] = net.encoder_frozen();
  header["has_optimizer"] = optimizer != nullptr;
  if (optimizer)
    header["adam"] = {{"lr", optimizer->lr},
                      {"beta1", optimizer->beta1},
                      {"beta2", optimizer->beta2},
                      {"eps", optimizer->eps},
                      {"t", optimizer->t}};
  const std::string hs = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), std::streamsize(hs.size()));
  for (auto& p : net.parameters()) put_block(out, p.data());
  for (auto* rs : net.running_stats()) put_block(out, *rs);
  if (optimizer) {
    for (auto& m : optimizer->m) put_block(out, m);
    for (auto& v : optimizer->v) put_block(out, v);
  }
  write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version");
  std::string hs(hlen, '\0');
  in.read(hs.data(), std::streamsize(hlen));
  const json header = json::parse(hs);

  Checkpoint ck;
  ck.net = MirrorLinkNet<float>::build(config_from_json(header.at("config")), 0);
  for (auto& p : ck.net.parameters()) p.data() = get_block(in, p.numel());
  for (auto* rs : ck.net.running_stats()) *rs = get_block(in, rs->size());
  if (header.value("frozen_encoder", false)) ck.net.freeze_encoder();
  if (header.value("has_optimizer", false)) {
    AdamState<float> st;
    const auto& a = header.at("adam");
    st.lr = a.at("lr").get<float>();
    st.beta1 = a.at("beta1").get<float>();
    st.beta2 = a.at("beta2").get<float>();
    st.eps = a.at("eps").get<float>();
    st.t = a.at("t").get<std::int64_t>();
    auto params = ck.net.parameters();
    st.init(params);
    for (auto& m : st.m) m = get_block(in, m.size());
    for (auto& v : st.v) v = get_block(in, v.size());
    st.t = a.at("t").get<std::int64_t>();
    ck.optimizer = std::move(st);
  }
  return ck;
}

}  // namespace intrin
