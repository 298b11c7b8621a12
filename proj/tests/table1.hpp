#pragma once

#include <optional>
#include <string>
#include <vector>

#include "excl/inference.hpp"

namespace excl::fixtures {

/// Published clip localization accuracies (TACoS, Charades-STA, ActivityNet
/// at IoU 0.3/0.5/0.7); nullopt marks cells the source table leaves blank.
inline std::vector<ResultsRow> published_rows() {
  using V = std::vector<std::optional<double>>;
  const std::optional<double> na;
  auto row = [](std::string label, V a, V b, V c) {
    ResultsRow r;
    r.label = std::move(label);
    r.cells["TACoS"] = std::move(a);
    r.cells["Charades-STA"] = std::move(b);
    r.cells["ActivityNet"] = std::move(c);
    return r;
  };
  return {
      row("ACL", {24.2, 20.0, na}, {na, 30.5, 12.2}, {na, na, na}),
      row("SPN", {na, na, na}, {54.7, 35.6, 15.8}, {45.3, 27.7, 13.6}),
      row("MAN", {na, na, na}, {na, 46.5, 22.7}, {na, na, na}),
      row("ExCL-clf 1-a", {22.6, 12.6, 5.1}, {55.4, 30.4, 14.8}, {42.5, 23.8, 12.1}),
      row("ExCL-clf 1-b", {42.0, 25.0, 12.3}, {64.7, 43.8, 22.1}, {61.7, 40.4, 23.0}),
      row("ExCL-clf 1-c", {41.9, 25.5, 13.6}, {64.2, 43.9, 23.3}, {60.7, 40.9, 23.4}),
      row("ExCL-clf 2-a", {41.7, 26.0, 12.9}, {64.6, 41.5, 20.3}, {60.4, 40.5, 23.1}),
      row("ExCL-clf 2-b", {44.2, 28.0, 14.6}, {65.1, 44.1, 22.6}, {61.1, 41.3, 23.4}),
      row("ExCL-clf 2-c", {44.4, 27.8, 14.6}, {61.4, 41.2, 21.3}, {62.1, 41.6, 23.9}),
      row("ExCL-reg 1-a", {26.2, 11.9, 4.8}, {54.7, 34.0, 14.5}, {48.4, 27.0, 11.0}),
      row("ExCL-reg 1-b", {45.2, 27.5, 12.9}, {60.1, 42.6, 21.6}, {63.0, 43.6, 23.6}),
      row("ExCL-reg 1-c", {41.4, 24.8, 11.4}, {59.0, 43.1, 20.7}, {61.5, 42.7, 23.4}),
      row("ExCL-reg 2-a", {42.2, 27.2, 11.7}, {59.6, 41.9, 20.2}, {61.5, 41.9, 23.3}),
      row("ExCL-reg 2-b", {45.5, 28.0, 13.8}, {61.5, 44.1, 22.4}, {62.3, 42.7, 24.1}),
      row("ExCL-reg 2-c", {42.3, 27.3, 12.5}, {58.0, 41.8, 20.5}, {61.4, 41.7, 22.4}),
  };
}

inline std::vector<std::string> published_datasets() { return {"TACoS", "Charades-STA", "ActivityNet"}; }

/// Expected rendering of published_rows(), kept verbatim so any change to
/// the emitter's layout shows up as a byte difference.
inline const char* published_table() {
  return "             |     TACoS      |  Charades-STA  |  ActivityNet\n"
         "IoU          |  0.3  0.5  0.7 |  0.3  0.5  0.7 |  0.3  0.5  0.7\n"
         "-------------+----------------+----------------+----------------\n"
         "ACL          | 24.2 20.0   -- |   -- 30.5 12.2 |   --   --   --\n"
         "SPN          |   --   --   -- | 54.7 35.6 15.8 | 45.3 27.7 13.6\n"
         "MAN          |   --   --   -- |   -- 46.5 22.7 |   --   --   --\n"
         "ExCL-clf 1-a | 22.6 12.6  5.1 | 55.4 30.4 14.8 | 42.5 23.8 12.1\n"
         "ExCL-clf 1-b | 42.0 25.0 12.3 | 64.7 43.8 22.1 | 61.7 40.4 23.0\n"
         "ExCL-clf 1-c | 41.9 25.5 13.6 | 64.2 43.9 23.3 | 60.7 40.9 23.4\n"
         "ExCL-clf 2-a | 41.7 26.0 12.9 | 64.6 41.5 20.3 | 60.4 40.5 23.1\n"
         "ExCL-clf 2-b | 44.2 28.0 14.6 | 65.1 44.1 22.6 | 61.1 41.3 23.4\n"
         "ExCL-clf 2-c | 44.4 27.8 14.6 | 61.4 41.2 21.3 | 62.1 41.6 23.9\n"
         "ExCL-reg 1-a | 26.2 11.9  4.8 | 54.7 34.0 14.5 | 48.4 27.0 11.0\n"
         "ExCL-reg 1-b | 45.2 27.5 12.9 | 60.1 42.6 21.6 | 63.0 43.6 23.6\n"
         "ExCL-reg 1-c | 41.4 24.8 11.4 | 59.0 43.1 20.7 | 61.5 42.7 23.4\n"
         "ExCL-reg 2-a | 42.2 27.2 11.7 | 59.6 41.9 20.2 | 61.5 41.9 23.3\n"
         "ExCL-reg 2-b | 45.5 28.0 13.8 | 61.5 44.1 22.4 | 62.3 42.7 24.1\n"
         "ExCL-reg 2-c | 42.3 27.3 12.5 | 58.0 41.8 20.5 | 61.4 41.7 22.4\n";
}

}  // namespace excl::fixtures
