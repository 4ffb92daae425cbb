// Copyright 2026 The gmfsim Authors. All Rights Reserved.
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
// =============================================================================

// CSV emitters for per-round metrics, policy comparisons and rate sweeps.
// Reals are written with 17 significant digits so they parse back exactly.

#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <ostream>
#include <span>
#include <string>

#include "gmf/error.hpp"
#include "gmf/harness.hpp"

namespace gmf {

inline constexpr const char* kMetricsHeader =
    "round,policy,tau,train_loss,test_accuracy,upload_bytes_cum,download_bytes_cum,broadcast_nnz,"
    "mean_mask_jaccard";
inline constexpr const char* kPlotHeader =
    "policy,compression_rate,final_accuracy,upload_bytes_total,download_bytes_total,total_bytes";
inline constexpr const char* kComparisonHeader =
    "policy,final_accuracy,delta_accuracy,upload_bytes,download_bytes,total_bytes,delta_total_bytes";

inline std::string format_real(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  if (ec != std::errc()) throw IoError("format_real: conversion failed");
  return std::string(buf.data(), ptr);
}

inline void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.round << ',' << r.policy << ',' << format_real(r.tau) << ','
        << format_real(r.train_loss) << ',' << format_real(r.test_accuracy) << ','
        << r.upload_bytes_cum << ',' << r.download_bytes_cum << ',' << r.broadcast_nnz << ','
        << format_real(r.mean_mask_jaccard) << '\n';
  }
}

inline void write_plot_data(std::span<const RatePoint> points, std::ostream& out) {
  out << kPlotHeader << '\n';
  for (const auto& p : points) {
    out << p.policy << ',' << format_real(p.compression_rate) << ','
        << format_real(p.final_accuracy) << ',' << p.upload_bytes << ',' << p.download_bytes
        << ',' << p.total_bytes << '\n';
  }
}

inline void write_comparison(std::span<const ComparisonRow> rows, std::ostream& out) {
  out << kComparisonHeader << '\n';
  for (const auto& r : rows) {
    out << r.policy << ',' << format_real(r.final_accuracy) << ',' << format_real(r.delta_accuracy)
        << ',' << r.upload_bytes << ',' << r.download_bytes << ',' << r.total_bytes << ','
        << r.delta_total_bytes << '\n';
  }
}

namespace detail {

template <class Rows, class Writer>
void write_file(const Rows& rows, const std::string& path, Writer writer) {
  if (rows.empty()) throw PreconditionError("refusing to write an empty table to '" + path + "'");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  writer(std::span(rows), out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

inline void emit_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  detail::write_file(rows, path, [](std::span<const MetricsRow> r, std::ostream& o) {
    write_metrics_csv(r, o);
  });
}

inline void emit_plot_data(const std::vector<RatePoint>& points, const std::string& path) {
  detail::write_file(points, path, [](std::span<const RatePoint> r, std::ostream& o) {
    write_plot_data(r, o);
  });
}

inline void emit_comparison(const std::vector<ComparisonRow>& rows, const std::string& path) {
  detail::write_file(rows, path, [](std::span<const ComparisonRow> r, std::ostream& o) {
    write_comparison(r, o);
  });
}

}  // namespace gmf
