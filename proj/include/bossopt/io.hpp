#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bossopt/types.hpp"

namespace bossopt {

// Flat "section.key = value" configuration text. '#' starts a comment.
// Duplicate keys are rejected so typos cannot silently win.
using FlatConfig = std::map<std::string, std::string>;

FlatConfig parse_flat_config(std::istream& is);
FlatConfig parse_flat_config_file(const std::string& path);

void write_dataset_csv(const OfflineDataset& data, std::ostream& os);
// y_min/y_max are not part of the CSV; the caller supplies them.
OfflineDataset read_dataset_csv(std::istream& is, double y_min, double y_max);

// FNV-1a over the CSV byte representation.
std::uint64_t dataset_hash(const OfflineDataset& data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace bossopt
