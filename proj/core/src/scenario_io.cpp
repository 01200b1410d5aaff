#include "gwbayes/scenario_io.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gwbayes/error.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes {

using nlohmann::json;

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Field access with the JSON path carried into every error message.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

  Reader at(const char* key) const {
    if (!node_.is_object() || !node_.contains(key)) fail(child(key), "missing required field");
    return Reader(node_.at(key), child(key));
  }
  Reader at(std::size_t i) const {
    return Reader(node_.at(i), path_ + "[" + std::to_string(i) + "]");
  }

  const json& raw() const { return node_; }
  const std::string& path() const { return path_; }

  double number() const {
    if (!node_.is_number()) fail(path_, "expected a number");
    return node_.get<double>();
  }
  double number_or(const char* key, double fallback) const {
    return has(key) ? at(key).number() : fallback;
  }
  int integer() const {
    if (!node_.is_number_integer()) fail(path_, "expected an integer");
    return node_.get<int>();
  }
  std::string string() const {
    if (!node_.is_string()) fail(path_, "expected a string");
    return node_.get<std::string>();
  }
  std::size_t size() const {
    if (!node_.is_array()) fail(path_, "expected an array");
    return node_.size();
  }
  CellIndex cell() const {
    if (!node_.is_array() || node_.size() != 3) fail(path_, "expected a [layer,row,col] triple");
    return {at(std::size_t{0}).integer(), at(1).integer(), at(2).integer()};
  }

  // Scalar broadcast, per-layer values (when `per_layer` > 0) or a full array.
  std::vector<double> field(std::size_t n, std::size_t per_layer = 0, std::size_t layer_size = 0) const {
    if (node_.is_number()) return std::vector<double>(n, number());
    const auto len = size();
    std::vector<double> out;
    out.reserve(n);
    if (per_layer > 0 && len == per_layer && len != n) {
      for (std::size_t k = 0; k < per_layer; ++k) {
        out.insert(out.end(), layer_size, at(k).number());
      }
      return out;
    }
    if (len != n) {
      fail(path_, "expected " + std::to_string(n) + " values, found " + std::to_string(len));
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(at(i).number());
    return out;
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
    throw ParseError("field '" + field + "': " + msg, 0, field);
  }

 private:
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& node_;
  std::string path_;
};

json cell_json(const CellIndex& c) { return json::array({c.layer, c.row, c.col}); }

Scenario build(const json& doc, const std::filesystem::path& base_dir) {
  Reader root(doc, "");
  Scenario s;
  if (root.has("name")) s.name = root.at("name").string();

  const Reader g = root.at("grid");
  s.grid = Grid(g.at("n_layers").integer(), g.at("n_rows").integer(), g.at("n_cols").integer(),
                g.at("cell_dx").number(), g.at("cell_dy").number());
  Grid& grid = s.grid;
  grid.surface_elev() = g.at("surface_elev").field(grid.n_columns());
  grid.layer_bottoms() =
      g.at("layer_bottoms").field(grid.n_cells(), static_cast<std::size_t>(grid.n_layers()), grid.n_columns());
  if (g.has("active")) {
    const auto mask = g.at("active").field(grid.n_cells());
    for (std::size_t i = 0; i < mask.size(); ++i) grid.active()[i] = mask[i] != 0.0 ? 1 : 0;
  }

  const Reader z = root.at("zones");
  {
    const auto ids = z.at("zone_id").field(grid.n_cells(), static_cast<std::size_t>(grid.n_layers()), grid.n_columns());
    s.zones.zone_id.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      s.zones.zone_id[i] = grid.is_active(i) ? static_cast<int>(ids[i]) : 0;
    }
  }
  s.porosity = z.number_or("porosity", 0.2);
  s.anisotropy_ratio = z.number_or("anisotropy_ratio", 1.0);

  if (root.has("chd")) {
    const Reader list = root.at("chd");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Reader e = list.at(i);
      s.bc.chd.push_back({e.at("cell").cell(), e.at("head").number()});
    }
  }
  if (root.has("ghb")) {
    const Reader list = root.at("ghb");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Reader e = list.at(i);
      s.bc.ghb.push_back({e.at("cell").cell(), e.at("head").number(), e.at("conductance").number()});
    }
  }
  if (root.has("drn")) {
    const Reader list = root.at("drn");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Reader e = list.at(i);
      s.bc.drn.push_back({e.at("cell").cell(), e.at("elevation").number(),
                          e.number_or("conductance", kDefaultDrainConductance)});
    }
  }

  s.bc.rch_base.assign(grid.n_columns(), 0.0);
  s.bc.irrigated.assign(grid.n_columns(), 0);
  if (root.has("recharge")) {
    const Reader r = root.at("recharge");
    if (r.has("rch_base")) s.bc.rch_base = r.at("rch_base").field(grid.n_columns());
    if (r.has("irrigated")) {
      const Reader list = r.at("irrigated");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const Reader e = list.at(i);
        if (e.size() != 2) Reader::fail(e.path(), "expected a [row,col] pair");
        const int row = e.at(std::size_t{0}).integer();
        const int col = e.at(1).integer();
        if (row < 0 || row >= grid.n_rows() || col < 0 || col >= grid.n_cols()) {
          Reader::fail(e.path(), "irrigated column outside the grid");
        }
        s.bc.irrigated[grid.column(row, col)] = 1;
      }
    }
  }

  if (root.has("wells")) {
    const Reader list = root.at("wells");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Reader e = list.at(i);
      Well w;
      w.id = e.at("id").string();
      w.cell = e.at("cell").cell();
      if (e.has("observed_head") && !e.raw().at("observed_head").is_null()) {
        w.observed_head = e.at("observed_head").number();
      }
      s.wells.push_back(std::move(w));
    }
  }
  if (root.has("wells_csv")) {
    if (!s.wells.empty()) Reader::fail("wells_csv", "wells and wells_csv are mutually exclusive");
    auto path = std::filesystem::path(root.at("wells_csv").string());
    if (path.is_relative()) path = base_dir / path;
    s.wells = load_wells_csv(path);
  }

  if (root.has("expert")) {
    const Reader e = root.at("expert");
    s.expert.h_pas_star = e.number_or("h_pas_star", s.expert.h_pas_star);
    s.expert.sigma_hpas = e.number_or("sigma_hpas", s.expert.sigma_hpas);
  }
  if (root.has("prior")) {
    const Reader p = root.at("prior");
    for (std::size_t j = 0; j < ParameterVector::kSize; ++j) {
      if (!p.has(kParameterNames[j])) continue;
      const Reader b = p.at(kParameterNames[j]);
      if (b.size() != 2) Reader::fail(b.path(), "expected [low, high]");
      s.prior.bounds[j] = {b.at(std::size_t{0}).number(), b.at(1).number()};
    }
  }
  return s;
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto line = line_of(text, e.byte);
    throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
  }
  Scenario s;
  try {
    s = build(doc, base_dir);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return parse_scenario(text, path.parent_path());
}

std::string scenario_to_json(const Scenario& s) {
  const Grid& g = s.grid;
  json doc;
  doc["name"] = s.name;
  std::vector<int> active(g.active().begin(), g.active().end());
  doc["grid"] = {{"n_layers", g.n_layers()},
                 {"n_rows", g.n_rows()},
                 {"n_cols", g.n_cols()},
                 {"cell_dx", g.cell_dx()},
                 {"cell_dy", g.cell_dy()},
                 {"surface_elev", g.surface_elev()},
                 {"layer_bottoms", g.layer_bottoms()},
                 {"active", active}};
  doc["zones"] = {{"zone_id", s.zones.zone_id},
                  {"porosity", s.porosity},
                  {"anisotropy_ratio", s.anisotropy_ratio}};
  doc["chd"] = json::array();
  for (const auto& b : s.bc.chd) doc["chd"].push_back({{"cell", cell_json(b.cell)}, {"head", b.head}});
  doc["ghb"] = json::array();
  for (const auto& b : s.bc.ghb) {
    doc["ghb"].push_back({{"cell", cell_json(b.cell)}, {"head", b.head}, {"conductance", b.conductance}});
  }
  doc["drn"] = json::array();
  for (const auto& b : s.bc.drn) {
    doc["drn"].push_back(
        {{"cell", cell_json(b.cell)}, {"elevation", b.elevation}, {"conductance", b.conductance}});
  }
  json irrigated = json::array();
  for (int r = 0; r < g.n_rows(); ++r) {
    for (int c = 0; c < g.n_cols(); ++c) {
      if (s.bc.irrigated[g.column(r, c)] != 0) irrigated.push_back({r, c});
    }
  }
  doc["recharge"] = {{"rch_base", s.bc.rch_base}, {"irrigated", irrigated}};
  doc["wells"] = json::array();
  for (const auto& w : s.wells) {
    json e = {{"id", w.id}, {"cell", cell_json(w.cell)}};
    e["observed_head"] = w.observed_head ? json(*w.observed_head) : json(nullptr);
    doc["wells"].push_back(std::move(e));
  }
  doc["expert"] = {{"h_pas_star", s.expert.h_pas_star}, {"sigma_hpas", s.expert.sigma_hpas}};
  json prior;
  for (std::size_t j = 0; j < ParameterVector::kSize; ++j) {
    prior[kParameterNames[j]] = {s.prior.bounds[j].low, s.prior.bounds[j].high};
  }
  doc["prior"] = prior;
  return doc.dump(1) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_text_file(path, scenario_to_json(scenario));
}

WellSet parse_wells_csv(std::string_view text) {
  WellSet wells;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (!fields.empty() && fields[0] == "well_id") continue;
    }
    if (fields.size() != 5) {
      throw ParseError("wells csv line " + std::to_string(line_no) + ": expected 5 fields", line_no);
    }
    try {
      Well w;
      w.id = fields[0];
      w.cell = {std::stoi(fields[1]), std::stoi(fields[2]), std::stoi(fields[3])};
      if (!fields[4].empty()) w.observed_head = std::stod(fields[4]);
      wells.push_back(std::move(w));
    } catch (const std::logic_error&) {
      throw ParseError("wells csv line " + std::to_string(line_no) + ": malformed number", line_no);
    }
  }
  return wells;
}

WellSet load_wells_csv(const std::filesystem::path& path) { return parse_wells_csv(read_text_file(path)); }

std::string wells_to_csv(const WellSet& wells) {
  std::string out = "well_id,layer,row,col,observed_head_m\n";
  for (const auto& w : wells) {
    out += w.id + "," + std::to_string(w.cell.layer) + "," + std::to_string(w.cell.row) + "," +
           std::to_string(w.cell.col) + "," + (w.observed_head ? format_double(*w.observed_head) : "") + "\n";
  }
  return out;
}

}  // namespace gwbayes
