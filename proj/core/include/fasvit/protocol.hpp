#pragma once

// Protocol split definitions: named filter sets over manifest columns that
// carve a manifest into train / calib / test row sets, with optional folds
// (e.g. leave-one-device-out). Specs are loaded from JSON files:
//
//   {
//     "name": "example_p3",
//     "folds": [
//       { "name": "fold1",
//         "train": { "device": { "not_in": ["d6"] } },
//         "test":  { "device": { "in": ["d6"] } } }
//     ]
//   }
//
// Each fold maps column names to predicate objects. Supported predicate
// keys, all of which must hold for a row to match (AND semantics):
//   in:      value is one of the listed strings
//   not_in:  value is none of the listed strings
//   regex:   value matches the ECMAScript regex (full match)
//   lt/le/gt/ge: numeric comparison, frame_index column only
// A fold without a "calib" entry calibrates on its test rows.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fasvit/manifest.hpp"

namespace fasvit {

struct ColumnFilter {
  std::vector<std::string> in_values;
  std::vector<std::string> not_in_values;
  std::string regex;  // empty = unused
  std::optional<int> lt, le, gt, ge;
};

// Column name -> predicate. Rows must satisfy every entry.
using RowFilter = std::map<std::string, ColumnFilter>;

struct FoldSpec {
  std::string name;
  RowFilter train;
  std::optional<RowFilter> calib;
  RowFilter test;
};

struct ProtocolSpec {
  std::string name;
  std::vector<FoldSpec> folds;
};

struct SplitResult {
  std::vector<ManifestRow> train;
  std::vector<ManifestRow> calib;
  std::vector<ManifestRow> test;
};

// True when the row satisfies every column predicate in the filter.
// Unknown column names and malformed predicates throw invalid_argument.
bool matches(const RowFilter& filter, const ManifestRow& row);

// Parses a protocol spec from a JSON file. Structural problems throw
// IoError naming the file and offending key.
ProtocolSpec load_protocol(const std::string& path);
ProtocolSpec parse_protocol(const std::string& json_text, const std::string& what);

// Applies one fold of the protocol to the manifest. Train/test overlap is a
// contract violation; an empty train or test set is an invalid argument.
// A fold without a calib filter calibrates on the test rows.
SplitResult load_split(const Manifest& manifest, const ProtocolSpec& protocol,
                       std::size_t fold_index);

}  // namespace fasvit
