#ifndef OPTREE_SERIALIZE_HPP
#define OPTREE_SERIALIZE_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optree/estimator.hpp"
#include "optree/marginal.hpp"
#include "optree/sampler.hpp"

namespace optree {

inline constexpr int kFormatVersion = 1;

using Json = nlohmann::ordered_json;

Json region_json(const Region& region);
Json phi_table_json(const PhiTable& table);
Json tree_json(const TreeTopology& tree);
Json density_json(const PiecewiseDensity& density);
Json draws_json(const std::vector<RandomMeasureDraw>& draws);

/// Round-trip "%.17g" text for CSV cells.
std::string format_double(double v);

/// One row per grid cell: lower and upper bound per axis (the cell state for
/// tables), then the value.
void write_grid_csv(std::ostream& out, const DensityGrid& grid);
void write_rows_csv(std::ostream& out, std::size_t dims, const std::vector<double>& coords);

/// Writes `doc` indented by two spaces with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& doc);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace optree

#endif  // OPTREE_SERIALIZE_HPP
