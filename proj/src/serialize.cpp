#include "optree/serialize.hpp"

#include <fstream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace optree {

Json region_json(const Region& region) {
  Json out;
  out["key"] = canonical_key(region).to_string();
  out["level"] = region.level();
  if (region.kind() == RegionKind::Continuous) {
    Json bounds = Json::array();
    for (std::size_t d = 0; d < region.dims(); ++d) bounds.push_back({region.lower(d), region.upper(d)});
    out["bounds"] = std::move(bounds);
  } else {
    Json states = Json::array();
    for (std::size_t d = 0; d < region.dims(); ++d) states.push_back(region.state(d));
    out["states"] = std::move(states);
  }
  out["measure"] = measure(region);
  return out;
}

Json phi_table_json(const PhiTable& table) {
  Json entries = Json::array();
  for (const auto& [key, e] : table.sorted_entries()) {
    Json row = region_json(region_from_key(key));
    row["count"] = e->count;
    row["log_phi"] = e->log_phi;
    row["log_phi0"] = e->log_phi0;
    row["post_rho"] = e->post_rho;
    row["post_lambda"] = e->post_lambda;
    Json alpha = Json::array();
    for (const auto& a : e->post_alpha) alpha.push_back({a.left, a.right});
    row["post_alpha"] = std::move(alpha);
    row["terminal"] = to_string(e->terminal);
    entries.push_back(std::move(row));
  }
  Json out;
  out["format_version"] = kFormatVersion;
  out["entries"] = std::move(entries);
  return out;
}

namespace {

Json node_json(const TreeTopology& tree, std::size_t i) {
  const TreeNode& node = tree.nodes[i];
  Json out = region_json(node.region);
  out["count"] = node.count;
  if (node.leaf) {
    out["leaf"] = true;
    out["stop"] = to_string(node.reason);
    return out;
  }
  out["leaf"] = false;
  out["split"] = node.split;
  out["split_dim"] = node.split_dim;
  out["children"] = {node_json(tree, node.children[0]), node_json(tree, node.children[1])};
  return out;
}

}  // namespace

Json tree_json(const TreeTopology& tree) {
  Json out;
  out["format_version"] = kFormatVersion;
  out["scheme"] = to_string(tree.scheme.kind);
  out["dims"] = tree.scheme.dims;
  out["depth"] = tree.depth();
  Json leaves = Json::array();
  for (auto i : tree.leaves()) {
    Json leaf = region_json(tree.nodes[i].region);
    leaf["count"] = tree.nodes[i].count;
    leaf["stop"] = to_string(tree.nodes[i].reason);
    leaves.push_back(std::move(leaf));
  }
  out["leaf_count"] = leaves.size();
  out["leaves"] = std::move(leaves);
  out["root"] = tree.nodes.empty() ? Json() : node_json(tree, 0);
  return out;
}

Json density_json(const PiecewiseDensity& density) {
  Json out;
  out["format_version"] = kFormatVersion;
  out["scheme"] = to_string(density.scheme.kind);
  out["dims"] = density.scheme.dims;
  out["integral"] = density.integral();
  Json pieces = Json::array();
  for (const auto& piece : density.pieces) {
    Json row = region_json(piece.region);
    row["density"] = piece.density;
    pieces.push_back(std::move(row));
  }
  out["pieces"] = std::move(pieces);
  return out;
}

Json draws_json(const std::vector<RandomMeasureDraw>& draws) {
  Json list = Json::array();
  for (const auto& draw : draws) {
    Json d;
    d["seed"] = draw.seed;
    d["depth"] = draw.depth;
    d["live_mass"] = draw.live_mass;
    Json pieces = Json::array();
    for (const auto& piece : draw.pieces) {
      Json row = region_json(piece.region);
      row["mass"] = piece.mass;
      row["density"] = piece.mass / measure(piece.region);
      row["stopped"] = piece.stopped;
      pieces.push_back(std::move(row));
    }
    d["pieces"] = std::move(pieces);
    list.push_back(std::move(d));
  }
  Json out;
  out["format_version"] = kFormatVersion;
  out["draws"] = std::move(list);
  return out;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_grid_csv(std::ostream& out, const DensityGrid& grid) {
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    for (auto c : grid.cell_coords(i)) {
      if (grid.discrete)
        out << format_double(grid.cell_lower(c)) << ',';
      else
        out << format_double(grid.cell_lower(c)) << ',' << format_double(grid.cell_upper(c)) << ',';
    }
    out << format_double(grid.values[i]) << '\n';
  }
}

void write_rows_csv(std::ostream& out, std::size_t dims, const std::vector<double>& coords) {
  for (std::size_t i = 0; i < coords.size(); i += dims) {
    for (std::size_t d = 0; d < dims; ++d) out << (d ? "," : "") << format_double(coords[i + d]);
    out << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json_file(const std::filesystem::path& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace optree
