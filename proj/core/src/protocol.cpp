#include "fasvit/protocol.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fasvit/common.hpp"
#include "fasvit/image_io.hpp"

namespace fasvit {

namespace {

std::string column_value(const ManifestRow& row, const std::string& column) {
  if (column == "path") return row.path;
  if (column == "label") return to_string(row.label);
  if (column == "attack_type") return to_string(row.attack);
  if (column == "subject_id") return row.subject_id;
  if (column == "session") return row.session;
  if (column == "device") return row.device;
  if (column == "video_id") return row.video_id;
  if (column == "frame_index") return std::to_string(row.frame_index);
  throw std::invalid_argument("unknown manifest column '" + column + "'");
}

bool numeric_ok(const ColumnFilter& f, int v) {
  if (f.lt && !(v < *f.lt)) return false;
  if (f.le && !(v <= *f.le)) return false;
  if (f.gt && !(v > *f.gt)) return false;
  if (f.ge && !(v >= *f.ge)) return false;
  return true;
}

ColumnFilter parse_filter(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw IoError(what + ": predicate must be an object");
  ColumnFilter f;
  for (const auto& [key, value] : j.items()) {
    if (key == "in" || key == "not_in") {
      if (!value.is_array()) throw IoError(what + "." + key + ": expected an array");
      auto& dst = key == "in" ? f.in_values : f.not_in_values;
      for (const auto& v : value) {
        if (!v.is_string()) throw IoError(what + "." + key + ": expected strings");
        dst.push_back(v.get<std::string>());
      }
    } else if (key == "regex") {
      if (!value.is_string()) throw IoError(what + ".regex: expected a string");
      f.regex = value.get<std::string>();
    } else if (key == "lt" || key == "le" || key == "gt" || key == "ge") {
      if (!value.is_number_integer()) throw IoError(what + "." + key + ": expected an integer");
      const int v = value.get<int>();
      if (key == "lt") f.lt = v;
      else if (key == "le") f.le = v;
      else if (key == "gt") f.gt = v;
      else f.ge = v;
    } else {
      throw IoError(what + ": unknown predicate key '" + key + "'");
    }
  }
  return f;
}

RowFilter parse_row_filter(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw IoError(what + ": expected an object of column predicates");
  RowFilter filter;
  for (const auto& [column, pred] : j.items())
    filter[column] = parse_filter(pred, what + "." + column);
  return filter;
}

}  // namespace

bool matches(const RowFilter& filter, const ManifestRow& row) {
  for (const auto& [column, f] : filter) {
    const std::string v = column_value(row, column);
    if (!f.in_values.empty() &&
        std::find(f.in_values.begin(), f.in_values.end(), v) == f.in_values.end())
      return false;
    if (std::find(f.not_in_values.begin(), f.not_in_values.end(), v) != f.not_in_values.end())
      return false;
    if (!f.regex.empty()) {
      std::regex re;
      try {
        re = std::regex(f.regex, std::regex::ECMAScript);
      } catch (const std::regex_error&) {
        throw std::invalid_argument("bad regex in filter for column '" + column + "': " + f.regex);
      }
      if (!std::regex_match(v, re)) return false;
    }
    if (f.lt || f.le || f.gt || f.ge) {
      if (column != "frame_index")
        throw std::invalid_argument("numeric predicate on non-numeric column '" + column + "'");
      if (!numeric_ok(f, row.frame_index)) return false;
    }
  }
  return true;
}

ProtocolSpec parse_protocol(const std::string& json_text, const std::string& what) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(what + ": " + e.what());
  }
  if (!j.is_object()) throw IoError(what + ": top level must be an object");
  ProtocolSpec spec;
  if (!j.contains("name") || !j["name"].is_string())
    throw IoError(what + ": missing string field 'name'");
  spec.name = j["name"].get<std::string>();
  if (!j.contains("folds") || !j["folds"].is_array() || j["folds"].empty())
    throw IoError(what + ": 'folds' must be a non-empty array");
  for (std::size_t i = 0; i < j["folds"].size(); ++i) {
    const auto& jf = j["folds"][i];
    const std::string where = what + ".folds[" + std::to_string(i) + "]";
    if (!jf.is_object()) throw IoError(where + ": expected an object");
    FoldSpec fold;
    fold.name = jf.contains("name") && jf["name"].is_string()
                    ? jf["name"].get<std::string>()
                    : "fold" + std::to_string(i + 1);
    if (!jf.contains("train")) throw IoError(where + ": missing 'train'");
    if (!jf.contains("test")) throw IoError(where + ": missing 'test'");
    fold.train = parse_row_filter(jf["train"], where + ".train");
    fold.test = parse_row_filter(jf["test"], where + ".test");
    if (jf.contains("calib")) fold.calib = parse_row_filter(jf["calib"], where + ".calib");
    for (const auto& [key, _] : jf.items())
      if (key != "name" && key != "train" && key != "test" && key != "calib")
        throw IoError(where + ": unknown key '" + key + "'");
    spec.folds.push_back(std::move(fold));
  }
  for (const auto& [key, _] : j.items())
    if (key != "name" && key != "folds")
      throw IoError(what + ": unknown key '" + key + "'");
  return spec;
}

ProtocolSpec load_protocol(const std::string& path) {
  return parse_protocol(read_text_file(path), "protocol '" + path + "'");
}

SplitResult load_split(const Manifest& manifest, const ProtocolSpec& protocol,
                       std::size_t fold_index) {
  if (fold_index >= protocol.folds.size())
    throw std::invalid_argument("load_split: fold index " + std::to_string(fold_index) +
                                " out of range for protocol '" + protocol.name + "' with " +
                                std::to_string(protocol.folds.size()) + " folds");
  const FoldSpec& fold = protocol.folds[fold_index];

  SplitResult out;
  std::set<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    if (matches(fold.train, row)) {
      out.train.push_back(row);
      train_idx.insert(i);
    }
    if (matches(fold.test, row)) {
      out.test.push_back(row);
      test_idx.insert(i);
    }
    if (fold.calib && matches(*fold.calib, row)) out.calib.push_back(row);
  }

  for (std::size_t i : train_idx)
    if (test_idx.count(i))
      throw ContractError("protocol '" + protocol.name + "' fold '" + fold.name +
                          "': train and test overlap at row '" + manifest.rows[i].path + "'");
  if (out.train.empty())
    throw std::invalid_argument("protocol '" + protocol.name + "' fold '" + fold.name +
                                "': train filter matches no rows");
  if (out.test.empty())
    throw std::invalid_argument("protocol '" + protocol.name + "' fold '" + fold.name +
                                "': test filter matches no rows");
  if (!fold.calib) out.calib = out.test;
  if (out.calib.empty())
    throw std::invalid_argument("protocol '" + protocol.name + "' fold '" + fold.name +
                                "': calib filter matches no rows");
  return out;
}

}  // namespace fasvit
