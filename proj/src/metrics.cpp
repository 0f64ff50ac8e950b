// Copyright 2026 The Recycle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "recycle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>

#include "recycle/error.hpp"
#include "recycle/parallel.hpp"

namespace recycle::metrics {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Row {
  const char* name;
  double MetricMeans::*field;
};

constexpr Row kRows[] = {
    {"Ins. len", &MetricMeans::ins_tokens},
    {"Res. len", &MetricMeans::res_tokens},
    {"Ins. ppl", &MetricMeans::ins_ppl},
    {"Res. ppl 1", &MetricMeans::res_ppl_uncond},
    {"Res. ppl 2", &MetricMeans::res_ppl_cond},
    {"Coherent", &MetricMeans::coherence},
    {"IFD score", &MetricMeans::ifd},
};

ordered_json to_json(const SampleMetrics& s) {
  ordered_json doc;
  doc["record_id"] = s.record_id;
  doc["ins_tokens"] = s.ins_tokens;
  doc["res_tokens"] = s.res_tokens;
  doc["ins_ppl"] = s.ins_ppl;
  doc["res_ppl_uncond"] = s.res_ppl_uncond;
  doc["res_ppl_cond"] = s.res_ppl_cond;
  doc["coherence"] = s.coherence;
  doc["ifd"] = s.ifd;
  doc["ifd_flagged"] = s.ifd_flagged;
  return doc;
}

std::string pad_right(std::string text, std::size_t width) {
  if (text.size() < width) text.append(width - text.size(), ' ');
  return text;
}

std::string pad_left(std::string text, std::size_t width) {
  if (text.size() < width) text.insert(0, width - text.size(), ' ');
  return text;
}

}  // namespace

double perplexity(const oracle::TokenLogprobs& logprobs) {
  const auto span = logprobs.continuation();
  if (span.empty()) {
    throw Error(ErrorKind::kEmptySpan, "no scored tokens for perplexity");
  }
  double nll = 0.0;
  for (const auto& token : span) nll -= token.logprob;
  return std::exp(nll / static_cast<double>(span.size()));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "embedding dimensions differ: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw Error(ErrorKind::kZeroVector, "embedding has zero norm");
  }
  return std::clamp(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)), -1.0, 1.0);
}

IfdResult ifd_score(oracle::OracleGateway& gateway,
                    std::string_view instruction, std::string_view response,
                    const MetricsConfig& config) {
  if (instruction.empty() || response.empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "IFD needs a non-empty instruction and response");
  }
  const auto unconditional = gateway.score_logprobs("", response);
  const auto conditional = gateway.score_logprobs(
      std::string(instruction) + config.context_separator, response);
  IfdResult result;
  result.unconditional_ppl = perplexity(unconditional);
  result.conditional_ppl = perplexity(conditional);
  result.ifd = result.conditional_ppl / result.unconditional_ppl;
  result.flagged = result.ifd > 1.0;
  result.response_tokens = unconditional.continuation().size();
  return result;
}

double coherence(oracle::OracleGateway& gateway, std::string_view instruction,
                 std::string_view response) {
  const auto a = gateway.embed(instruction);
  const auto b = gateway.embed(response);
  return cosine_similarity(a, b);
}

SampleMetrics score_sample(oracle::OracleGateway& gateway,
                           const DatasetRecord& record,
                           const MetricsConfig& config) {
  const std::string instruction = merged_instruction(record);
  const auto ins = gateway.score_logprobs("", instruction);
  const auto ifd = ifd_score(gateway, instruction, record.response, config);

  SampleMetrics sample;
  sample.record_id = record.id;
  sample.ins_tokens = ins.continuation().size();
  sample.ins_ppl = perplexity(ins);
  sample.res_tokens = ifd.response_tokens;
  sample.res_ppl_uncond = ifd.unconditional_ppl;
  sample.res_ppl_cond = ifd.conditional_ppl;
  sample.ifd = ifd.ifd;
  sample.ifd_flagged = ifd.flagged;
  sample.coherence = coherence(gateway, instruction, record.response);
  return sample;
}

MetricMeans mean_of(std::span<const SampleMetrics> samples) {
  MetricMeans means;
  if (samples.empty()) return means;
  for (const auto& s : samples) {
    means.ins_tokens += static_cast<double>(s.ins_tokens);
    means.res_tokens += static_cast<double>(s.res_tokens);
    means.ins_ppl += s.ins_ppl;
    means.res_ppl_uncond += s.res_ppl_uncond;
    means.res_ppl_cond += s.res_ppl_cond;
    means.coherence += s.coherence;
    means.ifd += s.ifd;
  }
  const auto n = static_cast<double>(samples.size());
  for (const auto& row : kRows) means.*row.field /= n;
  return means;
}

MetricsReport dataset_report(const DatasetFile& dataset,
                             oracle::OracleGateway& gateway, std::string label,
                             const MetricsConfig& config) {
  if (dataset.records.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "nothing to score");
  }
  const std::size_t n = dataset.records.size();
  std::vector<std::optional<SampleMetrics>> scored(n);
  std::vector<std::string> reasons(n);

  parallel_for(n, config.concurrency, [&](std::size_t i) {
    try {
      scored[i] = score_sample(gateway, dataset.records[i], config);
    } catch (const Error& error) {
      if (error.kind() == ErrorKind::kReplayMiss) throw;
      reasons[i] = std::string(to_string(error.kind())) + ": " + error.what();
    }
  });

  MetricsReport report;
  report.label = std::move(label);
  report.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (scored[i]) {
      if (scored[i]->ifd_flagged) ++report.ifd_flagged;
      report.samples.push_back(std::move(*scored[i]));
    } else {
      report.failures.push_back({dataset.records[i].id, reasons[i]});
    }
  }
  report.n_success = report.samples.size();
  report.n_failed = report.failures.size();
  if (report.n_success == 0) {
    throw Error(ErrorKind::kAllRecordsFailed,
                "every record failed scoring; first: " +
                    report.failures.front().reason);
  }
  report.means = mean_of(report.samples);
  return report;
}

ordered_json to_json(const MetricsReport& report, bool include_samples) {
  ordered_json doc;
  doc["label"] = report.label;
  doc["n"] = report.n;
  doc["n_success"] = report.n_success;
  doc["n_failed"] = report.n_failed;
  doc["ifd_flagged"] = report.ifd_flagged;
  doc["aggregation"] = "arithmetic mean of per-sample values";
  ordered_json means;
  for (const auto& row : kRows) means[row.name] = report.means.*row.field;
  doc["means"] = std::move(means);
  ordered_json failures = ordered_json::array();
  for (const auto& failure : report.failures) {
    failures.push_back(
        {{"record_id", failure.record_id}, {"reason", failure.reason}});
  }
  doc["failures"] = std::move(failures);
  if (include_samples) {
    ordered_json samples = ordered_json::array();
    for (const auto& sample : report.samples) samples.push_back(to_json(sample));
    doc["samples"] = std::move(samples);
  }
  return doc;
}

std::string format_report_table(std::span<const MetricsReport> reports) {
  constexpr std::size_t kNameWidth = 12;
  std::vector<std::size_t> widths;
  for (const auto& report : reports) {
    widths.push_back(std::max<std::size_t>(report.label.size(), 10));
  }
  auto number = [](double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.3f", value);
    return std::string(buffer);
  };

  std::string out = pad_right("metric", kNameWidth);
  for (std::size_t c = 0; c < reports.size(); ++c) {
    out += "  " + pad_left(reports[c].label, widths[c]);
  }
  out += '\n';
  for (const auto& row : kRows) {
    out += pad_right(row.name, kNameWidth);
    for (std::size_t c = 0; c < reports.size(); ++c) {
      out += "  " + pad_left(number(reports[c].means.*row.field), widths[c]);
    }
    out += '\n';
  }
  auto count_row = [&](const char* name, auto getter) {
    out += pad_right(name, kNameWidth);
    for (std::size_t c = 0; c < reports.size(); ++c) {
      out += "  " + pad_left(std::to_string(getter(reports[c])), widths[c]);
    }
    out += '\n';
  };
  count_row("scored", [](const MetricsReport& r) { return r.n_success; });
  count_row("failed", [](const MetricsReport& r) { return r.n_failed; });
  count_row("IFD > 1", [](const MetricsReport& r) { return r.ifd_flagged; });
  out += "(means over per-sample values)\n";
  return out;
}

}  // namespace recycle::metrics
