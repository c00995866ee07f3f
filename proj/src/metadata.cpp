// Copyright 2026 The repreval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "repreval/metadata.hpp"

#include "repreval/error.hpp"
#include "repreval/tensor_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace repreval::io {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadHeader, "core-io", what); }

const std::string& need(const Metadata& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) bad("sidecar lacks key '" + key + "'");
  return it->second;
}

long long need_int(const Metadata& meta, const std::string& key) {
  const auto& s = need(meta, key);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad("key '" + key + "' is not an integer");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      bad("bad number '" + item + "'");
    }
  }
  return out;
}

std::string kind_name(FactorKind k) { return k == FactorKind::categorical ? "categorical" : "numerical"; }

FactorKind parse_kind(const std::string& s) {
  if (s == "categorical") return FactorKind::categorical;
  if (s == "numerical") return FactorKind::numerical;
  bad("unknown kind '" + s + "'");
}

}  // namespace

Metadata read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "core-io", "cannot open " + path.string());
  Metadata meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad("sidecar line without '=': " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

void write_metadata(const std::filesystem::path& path, const Metadata& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "core-io", "cannot write " + path.string());
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "core-io", "short write to " + path.string());
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p += ".meta";
  return p;
}

Metadata describe(const FactorSpace& space) {
  Metadata meta;
  meta["factors"] = std::to_string(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto prefix = "factor." + std::to_string(i) + ".";
    const auto& f = space[i];
    meta[prefix + "name"] = f.name;
    meta[prefix + "kind"] = kind_name(f.kind);
    meta[prefix + "ood"] = f.ood ? "1" : "0";
    if (f.kind == FactorKind::categorical) {
      meta[prefix + "cardinality"] = std::to_string(f.grid.size());
    } else {
      std::string grid;
      for (std::size_t g = 0; g < f.grid.size(); ++g) grid += (g ? "," : "") + format_double(f.grid[g]);
      meta[prefix + "grid"] = grid;
    }
  }
  return meta;
}

FactorSpace factor_space_from(const Metadata& meta) {
  const auto count = need_int(meta, "factors");
  FactorSpace space;
  for (long long i = 0; i < count; ++i) {
    const auto prefix = "factor." + std::to_string(i) + ".";
    const auto name = need(meta, prefix + "name");
    const bool ood = need(meta, prefix + "ood") == "1";
    if (parse_kind(need(meta, prefix + "kind")) == FactorKind::categorical) {
      space.push_back(FactorSpec::categorical(name, static_cast<int>(need_int(meta, prefix + "cardinality")), ood));
    } else {
      space.push_back(FactorSpec::numerical(name, parse_doubles(need(meta, prefix + "grid")), ood));
    }
  }
  validate(space);
  return space;
}

void save_factors(const std::filesystem::path& path, const FactorTable& table) {
  std::vector<double> codes;
  codes.reserve(static_cast<std::size_t>(table.codes.size()));
  for (Index n = 0; n < table.rows(); ++n) {
    for (Index f = 0; f < table.factors(); ++f) codes.push_back(static_cast<double>(table.codes(n, f)));
  }
  write_tensor(path, make_tensor({table.rows(), table.factors()}, Dtype::i32, std::move(codes)));
  auto meta = describe(table.space);
  meta["content"] = "factor_codes";
  write_metadata(sidecar_path(path), meta);
}

FactorTable load_factors(const std::filesystem::path& path) {
  const auto meta = read_metadata(sidecar_path(path));
  auto space = factor_space_from(meta);
  const auto t = read_tensor(path);
  if (t.shape.size() != 2 || t.shape[1] != static_cast<std::int64_t>(space.size())) {
    throw Error(ErrorCode::ShapeMismatch, "core-io", "factor tensor does not match its sidecar");
  }
  const Matrix m = t.to_matrix();
  if (meta.count("content") && meta.at("content") == "factor_values") return FactorTable::from_values(space, m);
  return FactorTable::from_codes(std::move(space), m.cast<Index>());
}

void save_representation(const std::filesystem::path& path, const Representation& repr) {
  if (repr.is_slotted()) {
    write_tensor(path, from_matrix(repr.data, {repr.rows(), repr.slots, repr.slot_dim}));
  } else {
    write_tensor(path, from_matrix(repr.data));
  }
}

Representation load_representation(const std::filesystem::path& path) {
  const auto t = read_tensor(path);
  const Matrix m = t.to_matrix();
  if (t.shape.size() == 3) return Representation::slotted(m, t.shape[1], t.shape[2]);
  if (t.shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "core-io", "representation must be rank 2 or 3");
  return Representation::flat(m);
}

void save_properties(const std::filesystem::path& path, const PropertyTable& table) {
  table.validate();
  const Index p = table.property_count();
  const Index m = table.max_objects();
  std::vector<double> values(static_cast<std::size_t>(table.scene_count() * m * (p + 2)), 0.0);
  for (Index s = 0; s < table.scene_count(); ++s) {
    const auto& scene = table.scenes[static_cast<std::size_t>(s)];
    for (Index o = 0; o < scene.objects(); ++o) {
      const auto base = static_cast<std::size_t>((s * m + o) * (p + 2));
      for (Index j = 0; j < p; ++j) values[base + static_cast<std::size_t>(j)] = scene.values(o, j);
      values[base + static_cast<std::size_t>(p)] = scene.visible[static_cast<std::size_t>(o)] ? 1 : 2;
      values[base + static_cast<std::size_t>(p + 1)] = scene.ood[static_cast<std::size_t>(o)] ? 1 : 0;
    }
  }
  write_tensor(path, make_tensor({table.scene_count(), m, p + 2}, Dtype::f32, std::move(values)));

  Metadata meta;
  meta["content"] = "properties";
  meta["properties"] = std::to_string(p);
  for (Index j = 0; j < p; ++j) {
    const auto prefix = "property." + std::to_string(j) + ".";
    const auto& spec = table.properties[static_cast<std::size_t>(j)];
    meta[prefix + "name"] = spec.name;
    meta[prefix + "kind"] = kind_name(spec.kind);
    meta[prefix + "classes"] = std::to_string(spec.classes);
    meta[prefix + "ood"] = (!table.ood_property.empty() && table.ood_property[static_cast<std::size_t>(j)]) ? "1" : "0";
  }
  std::string order;
  for (std::size_t i = 0; i < table.canonical_order.size(); ++i) {
    order += (i ? "," : "") + std::to_string(table.canonical_order[i]);
  }
  meta["canonical_order"] = order;
  write_metadata(sidecar_path(path), meta);
}

PropertyTable load_properties(const std::filesystem::path& path) {
  const auto meta = read_metadata(sidecar_path(path));
  PropertyTable table;
  const auto p = static_cast<Index>(need_int(meta, "properties"));
  for (Index j = 0; j < p; ++j) {
    const auto prefix = "property." + std::to_string(j) + ".";
    table.properties.push_back(PropertySpec{need(meta, prefix + "name"), parse_kind(need(meta, prefix + "kind")),
                                            static_cast<int>(need_int(meta, prefix + "classes"))});
    table.ood_property.push_back(need(meta, prefix + "ood") == "1");
  }
  for (double v : parse_doubles(need(meta, "canonical_order"))) table.canonical_order.push_back(static_cast<Index>(v));

  const auto t = read_tensor(path);
  if (t.shape.size() != 3 || t.shape[2] != p + 2) {
    throw Error(ErrorCode::ShapeMismatch, "core-io", "property tensor does not match its sidecar");
  }
  const auto scenes = t.shape[0], slots = t.shape[1];
  for (Index s = 0; s < scenes; ++s) {
    PropertyTable::Scene scene;
    std::vector<std::size_t> present;
    for (Index o = 0; o < slots; ++o) {
      const auto base = static_cast<std::size_t>((s * slots + o) * (p + 2));
      if (t.at(base + static_cast<std::size_t>(p)) != 0) present.push_back(base);
    }
    scene.values.resize(static_cast<Index>(present.size()), p);
    for (std::size_t o = 0; o < present.size(); ++o) {
      for (Index j = 0; j < p; ++j) scene.values(static_cast<Index>(o), j) = t.at(present[o] + static_cast<std::size_t>(j));
      scene.visible.push_back(t.at(present[o] + static_cast<std::size_t>(p)) == 1);
      scene.ood.push_back(t.at(present[o] + static_cast<std::size_t>(p + 1)) != 0);
    }
    table.scenes.push_back(std::move(scene));
  }
  table.validate();
  return table;
}

void save_masks(const std::filesystem::path& path, const MaskSet& masks) {
  write_tensor(path, from_masks(masks));
  Metadata meta;
  meta["content"] = "masks";
  std::string fg;
  for (std::size_t l = 0; l < masks.foreground.size(); ++l) fg += (l ? "," : "") + std::string(masks.foreground[l] ? "1" : "0");
  meta["foreground"] = fg;
  write_metadata(sidecar_path(path), meta);
}

MaskSet load_masks(const std::filesystem::path& path) {
  auto masks = to_masks(read_tensor(path));
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    const auto meta = read_metadata(side);
    if (meta.count("foreground")) {
      std::vector<bool> fg;
      for (double v : parse_doubles(meta.at("foreground"))) fg.push_back(v != 0);
      if (fg.size() < masks.foreground.size()) bad("foreground flags shorter than label range");
      masks.foreground = fg;
    }
  }
  return masks;
}

}  // namespace repreval::io
