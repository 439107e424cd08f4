#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "sepclr/binary_io.hpp"
#include "sepclr/datagen.hpp"
#include "sepclr/error.hpp"

namespace sepclr::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string cell(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, const fs::path& file, std::size_t line) {
  if (s.empty()) return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["kind"] = std::string(to_string(ds.kind));
  meta["seed"] = ds.seed;
  meta["n"] = ds.size();
  meta["n_background"] = ds.count(Origin::background);
  meta["n_target"] = ds.count(Origin::target);
  meta["input_dim"] = ds.input_dim();
  if (ds.image) {
    meta["image"] = {{"height", ds.image->height}, {"width", ds.image->width}, {"channels", ds.image->channels}};
  } else {
    meta["image"] = nullptr;
  }
  json factors = json::array();
  for (const auto& f : ds.factors) {
    factors.push_back({{"name", f.name},
                       {"kind", std::string(to_string(f.kind))},
                       {"scope", std::string(to_string(f.scope))},
                       {"num_classes", f.num_classes}});
  }
  meta["factors"] = factors;
  meta["attributes"] = ds.attribute_names;
  meta["blob"] = {{"file", std::string(kDatasetBlob)}, {"dtype", "float64"}, {"byte_order", "little"},
                  {"layout", "row-major"}};
  std::ofstream(dir / kDatasetMeta) << meta.dump(2) << "\n";

  std::ofstream csv(dir / kDatasetManifest);
  csv << "id,origin";
  for (const auto& f : ds.factors) csv << "," << f.name;
  for (const auto& a : ds.attribute_names) csv << ",attr_" << a;
  csv << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    csv << i << "," << to_string(ds.origin[i]);
    for (std::size_t f = 0; f < ds.factors.size(); ++f) csv << "," << cell(ds.factor_values(i, f));
    for (std::size_t a = 0; a < ds.attribute_names.size(); ++a) csv << "," << cell(ds.attributes(i, a));
    csv << "\n";
  }
  if (!csv) throw Error("failed writing " + (dir / kDatasetManifest).string());

  std::ofstream blob(dir / kDatasetBlob, std::ios::binary);
  binio::write_f64s(blob, ds.inputs.values());
  if (!blob) throw Error("failed writing " + (dir / kDatasetBlob).string());
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / kDatasetMeta;
  std::ifstream mf(meta_path);
  if (!mf) throw Error("cannot open " + meta_path.string());
  json meta;
  try {
    meta = json::parse(mf);
  } catch (const json::exception& e) {
    throw Error(meta_path.string() + ": " + e.what());
  }
  Dataset ds;
  std::size_t n = 0, dim = 0;
  try {
    if (meta.at("format_version").get<int>() != kFormatVersion) {
      throw Error(meta_path.string() + ": unsupported format_version");
    }
    ds.kind = parse_dataset_kind(meta.at("kind").get<std::string>());
    ds.seed = meta.at("seed").get<std::uint64_t>();
    n = meta.at("n").get<std::size_t>();
    dim = meta.at("input_dim").get<std::size_t>();
    if (!meta.at("image").is_null()) {
      const auto& im = meta["image"];
      ds.image = ImageShape{im.at("height").get<std::size_t>(), im.at("width").get<std::size_t>(),
                            im.at("channels").get<std::size_t>()};
      if (ds.image->size() != dim) throw Error(meta_path.string() + ": image shape does not match input_dim");
    }
    for (const auto& f : meta.at("factors")) {
      FactorInfo fi;
      fi.name = f.at("name").get<std::string>();
      fi.kind = f.at("kind").get<std::string>() == "continuous" ? FactorKind::continuous : FactorKind::categorical;
      fi.scope = f.at("scope").get<std::string>() == "salient" ? FactorScope::salient : FactorScope::common;
      fi.num_classes = f.at("num_classes").get<std::size_t>();
      ds.factors.push_back(fi);
    }
    ds.attribute_names = meta.at("attributes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(meta_path.string() + ": " + e.what());
  }

  const fs::path csv_path = dir / kDatasetManifest;
  std::ifstream csv(csv_path);
  if (!csv) throw Error("cannot open " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  const std::size_t ncols = 2 + ds.factors.size() + ds.attribute_names.size();
  if (split_csv(line).size() != ncols) throw Error(csv_path.string() + ": header has wrong column count");
  ds.origin.resize(n);
  ds.factor_values = Matrix(n, ds.factors.size());
  if (ds.has_attributes()) ds.attributes = Matrix(n, ds.attribute_names.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(csv, line)) throw Error(csv_path.string() + ": expected " + std::to_string(n) + " rows");
    const auto cells = split_csv(line);
    const std::size_t lineno = i + 2;
    if (cells.size() != ncols) throw Error(csv_path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    if (cells[0] != std::to_string(i)) {
      throw Error(csv_path.string() + ":" + std::to_string(lineno) + ": bad id '" + cells[0] + "'");
    }
    if (cells[1] == "background")
      ds.origin[i] = Origin::background;
    else if (cells[1] == "target")
      ds.origin[i] = Origin::target;
    else
      throw Error(csv_path.string() + ":" + std::to_string(lineno) + ": bad origin '" + cells[1] + "'");
    std::size_t c = 2;
    for (std::size_t f = 0; f < ds.factors.size(); ++f) ds.factor_values(i, f) = parse_cell(cells[c++], csv_path, lineno);
    for (std::size_t a = 0; a < ds.attribute_names.size(); ++a)
      ds.attributes(i, a) = parse_cell(cells[c++], csv_path, lineno);
  }
  while (std::getline(csv, line))
    if (!line.empty()) throw Error(csv_path.string() + ": more than " + std::to_string(n) + " rows");

  const fs::path blob_path = dir / kDatasetBlob;
  std::error_code ec;
  const auto bytes = fs::file_size(blob_path, ec);
  if (ec) throw Error("cannot open " + blob_path.string());
  if (bytes != n * dim * sizeof(double)) {
    throw Error(blob_path.string() + ": size " + std::to_string(bytes) + " bytes, expected " +
                std::to_string(n * dim * sizeof(double)));
  }
  std::ifstream blob(blob_path, std::ios::binary);
  ds.inputs = Matrix(n, dim);
  binio::read_f64s(blob, ds.inputs.values());
  return ds;
}

}  // namespace sepclr::data
