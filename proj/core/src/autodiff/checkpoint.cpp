#include "mdeeg/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mdeeg/error.hpp"

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {
namespace {

constexpr const char* kMagic = "MDEEG-CKPT 1";

void put_f32le(std::ostream& os, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

float get_f32le(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

bool valid_token(const std::string& s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\n' || c == '\t'; });
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + file.string());
  os << kMagic << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (!valid_token(k) || v.find('\n') != std::string::npos) throw std::invalid_argument("checkpoint: bad meta " + k);
    os << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& nt : ckpt.tensors) {
    if (!valid_token(nt.name)) throw std::invalid_argument("checkpoint: bad tensor name '" + nt.name + "'");
    os << "tensor " << nt.name << ' ' << nt.tensor.rank();
    for (std::size_t d : nt.tensor.shape()) os << ' ' << d;
    os << '\n';
  }
  os << "end\n";
  for (const auto& nt : ckpt.tensors) {
    for (real_t v : nt.tensor.data()) put_f32le(os, static_cast<float>(v));
  }
  if (!os) throw DataError("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + file.string());
  auto fail = [&](const std::string& why) -> DataError { return DataError(file.string() + ": " + why); };

  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw fail("not a checkpoint file");
  Checkpoint ckpt;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rank = 0;
      if (!(ls >> name >> rank) || rank > 8) throw fail("bad tensor line '" + line + "'");
      Shape shape(rank);
      for (auto& d : shape) {
        if (!(ls >> d)) throw fail("bad tensor line '" + line + "'");
      }
      ckpt.tensors.push_back({name, Tensor(shape)});
    } else {
      throw fail("unexpected header line '" + line + "'");
    }
  }
  if (!ended) throw fail("missing end of header");

  for (auto& nt : ckpt.tensors) {
    std::vector<unsigned char> buf(nt.tensor.numel() * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw fail("truncated payload for " + nt.name);
    auto out = nt.tensor.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<real_t>(get_f32le(buf.data() + 4 * i));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after payload");
  return ckpt;
}

void restore_tensors(const Checkpoint& ckpt, std::span<const NamedTensor> targets) {
  if (ckpt.tensors.size() != targets.size()) {
    throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    const auto& dst = targets[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw DataError("checkpoint tensor " + src.name + " " + to_string(src.tensor.shape()) + " does not match " +
                      dst.name + " " + to_string(dst.tensor.shape()));
    }
    Tensor t = dst.tensor;
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), t.data().begin());
  }
}

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
