// Copyright 2026 The rdcseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "rdcseg/checkpoint.h"

#include <array>
#include <bit>
#include <fstream>
#include <sstream>

namespace rdcseg {

void write_u32_le(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff),
                                 static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), b.size());
}

std::uint32_t read_u32_le(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  RDC_CHECK(is.good(), "unexpected end of binary stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& os, float v) {
  write_u32_le(os, std::bit_cast<std::uint32_t>(v));
}

float read_f32_le(std::istream& is) {
  return std::bit_cast<float>(read_u32_le(is));
}

void write_f64_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  write_u32_le(os, static_cast<std::uint32_t>(bits & 0xffffffffu));
  write_u32_le(os, static_cast<std::uint32_t>(bits >> 32));
}

double read_f64_le(std::istream& is) {
  const std::uint64_t lo = read_u32_le(is);
  const std::uint64_t hi = read_u32_le(is);
  return std::bit_cast<double>(lo | (hi << 32));
}

void write_tensor(std::ostream& os, const Tensor& t) {
  const Shape& s = t.shape();
  for (std::size_t e : {s.n, s.c, s.h, s.w}) {
    RDC_CHECK(e <= 0xffffffffu, "tensor extent " << e << " exceeds uint32");
    write_u32_le(os, static_cast<std::uint32_t>(e));
  }
  for (double v : t.data()) write_f32_le(os, static_cast<float>(v));
}

Tensor read_tensor(std::istream& is) {
  Shape s;
  s.n = read_u32_le(is);
  s.c = read_u32_le(is);
  s.h = read_u32_le(is);
  s.w = read_u32_le(is);
  Tensor t(s);
  for (double& v : t.data()) v = read_f32_le(is);
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  RDC_CHECK(os.good(), "cannot open " << path << " for writing");
  write_tensor(os, t);
  RDC_CHECK(os.good(), "failed writing " << path);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  RDC_CHECK(is.good(), "cannot open " << path);
  return read_tensor(is);
}

void save_checkpoint(
    const std::filesystem::path& dir,
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / kCheckpointManifest);
  RDC_CHECK(manifest.good(), "cannot write manifest in " << dir);
  for (const auto& [name, tensor] : tensors) {
    RDC_CHECK(!name.empty() && name.find_first_of(" \t\n") == std::string::npos,
              "checkpoint tensor name '" << name << "' is empty or has whitespace");
    const std::string file = name + ".bin";
    save_tensor(dir / file, *tensor);
    const Shape& s = tensor->shape();
    manifest << name << '\t' << file << '\t' << s.n << ' ' << s.c << ' '
             << s.h << ' ' << s.w << '\n';
  }
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kCheckpointManifest);
  RDC_CHECK(manifest.good(), "missing " << kCheckpointManifest << " in " << dir);
  std::vector<NamedTensor> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, file;
    Shape s;
    ls >> name >> file >> s.n >> s.c >> s.h >> s.w;
    RDC_CHECK(!ls.fail(), "malformed manifest line: " << line);
    Tensor t = load_tensor(dir / file);
    RDC_CHECK(t.shape() == s, "tensor " << name << " has shape " << t.shape().str()
                                        << " but manifest says " << s.str());
    out.push_back({name, std::move(t)});
  }
  return out;
}

}  // namespace rdcseg
