#include "bossopt/io.hpp"

#include <fstream>
#include <sstream>

namespace bossopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

FlatConfig parse_flat_config(std::istream& is) {
  FlatConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    BOSSOPT_REQUIRE(eq != std::string::npos,
                    "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    BOSSOPT_REQUIRE(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
    BOSSOPT_REQUIRE(!cfg.count(key), "config: duplicate key '" + key + "'");
    cfg[key] = value;
  }
  return cfg;
}

FlatConfig parse_flat_config_file(const std::string& path) {
  std::ifstream is(path);
  BOSSOPT_REQUIRE(is.good(), "cannot open config: " + path);
  return parse_flat_config(is);
}

void write_dataset_csv(const OfflineDataset& data, std::ostream& os) {
  for (std::size_t c = 0; c < data.d; ++c) os << "x_" << c << ',';
  os << "y\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto p = data.point(i);
    for (double v : p) os << format_double(v) << ',';
    os << format_double(data.y[i]) << '\n';
  }
}

OfflineDataset read_dataset_csv(std::istream& is, double y_min, double y_max) {
  std::string header;
  BOSSOPT_REQUIRE(static_cast<bool>(std::getline(is, header)), "dataset csv: missing header");
  const auto cols = split(header, ',');
  BOSSOPT_REQUIRE(cols.size() >= 2 && cols.back() == "y", "dataset csv: bad header");
  OfflineDataset ds;
  ds.d = cols.size() - 1;
  ds.y_min = y_min;
  ds.y_max = y_max;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto vals = split(line, ',');
    BOSSOPT_REQUIRE(vals.size() == cols.size(), "dataset csv: ragged row");
    for (std::size_t c = 0; c < ds.d; ++c) ds.x.push_back(std::stod(vals[c]));
    ds.y.push_back(std::stod(vals.back()));
  }
  ds.validate();
  return ds;
}

std::uint64_t dataset_hash(const OfflineDataset& data) {
  std::ostringstream os;
  write_dataset_csv(data, os);
  const std::string bytes = os.str();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  BOSSOPT_REQUIRE(is.good(), "cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  BOSSOPT_REQUIRE(os.good(), "cannot open for write: " + path);
  os << content;
}

}  // namespace bossopt
