#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "iteach/experiment.hpp"
#include "util/atomic_file.hpp"
#include "util/text.hpp"

namespace iteach {

namespace fs = std::filesystem;

namespace {

constexpr double kDefaultBeta = 20.0;

std::string method_label(const RunRecord& r) {
  if (r.method != Method::ITeach) return to_string(r.method);
  std::vector<std::string> parts;
  if (r.feedback_mode != FeedbackMode::Both) parts.push_back(to_string(r.feedback_mode));
  if (!r.warm_start) parts.push_back("no-ws");
  if (r.beta_deg != kDefaultBeta) parts.push_back("b=" + format_double(r.beta_deg));
  if (parts.empty()) return "iteach";
  std::string s = "iteach[";
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ";" : "") + parts[i];
  return s + "]";
}

std::string feedback_label(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::Both: return "CF+EF";
    case FeedbackMode::CorrectiveOnly: return "CF";
    case FeedbackMode::EvaluativeOnly: return "EF";
  }
  return "CF+EF";
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Group {
  std::vector<double> success;
  std::vector<double> correction;
  std::set<std::string> hashes;
  std::set<std::uint64_t> seeds;

  void add(const RunRecord& r) {
    success.push_back(r.success_rate);
    correction.push_back(r.correction_rate);
    hashes.insert(r.config_hash);
    seeds.insert(r.seed);
  }
  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  // Sample standard deviation, n/a below two values.
  static std::string stddev(const std::vector<double>& v) {
    if (v.size() < 2) return "n/a";
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return fixed(std::sqrt(s / static_cast<double>(v.size() - 1)));
  }
  std::string identity() const {
    std::string all;
    for (const auto& h : hashes) all += h + "\n";
    std::string seed_list;
    for (auto s : seeds) seed_list += (seed_list.empty() ? "" : ";") + std::to_string(s);
    return sha256_hex(all).substr(0, 16) + "," + seed_list;
  }
};

// Key -> group, keyed per task plus an "all" row.
template <class KeyFn>
std::map<std::vector<std::string>, Group> group_rows(const std::vector<RunRecord>& rows, KeyFn key, bool with_all) {
  std::map<std::vector<std::string>, Group> g;
  for (const auto& r : rows) {
    std::vector<std::string> k = key(r);
    if (k.empty()) continue;
    g[k].add(r);
    if (with_all) {
      k.front() = "all";
      g[k].add(r);
    }
  }
  return g;
}

std::string pad(const std::string& s, std::size_t w, bool right) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

std::string episodes_key(std::size_t e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08zu", e);  // sorts numerically inside the map
  return buf;
}

std::string unpad(const std::string& k) { return std::to_string(std::stoull(k)); }

}  // namespace

ReportFiles write_report(const std::vector<std::string>& csv_paths, const std::string& out_dir) {
  if (csv_paths.empty()) throw Error(ErrorCode::InvalidArgument, "report: no input CSV given");
  // A run shared by several grids is counted once.
  std::vector<RunRecord> rows;
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const auto& p : csv_paths)
    for (auto& r : parse_results_csv(read_text_file(p), p))
      if (seen.emplace(r.config_hash, r.seed).second) rows.push_back(std::move(r));
  if (rows.empty()) throw Error(ErrorCode::Experiment, "report: the input holds no result rows");

  std::map<std::string, std::string> files;

  // Table.
  {
    const auto g = group_rows(
        rows, [](const RunRecord& r) { return std::vector<std::string>{r.task, method_label(r), episodes_key(r.episodes)}; },
        false);
    const std::vector<std::string> head{"task", "method", "episodes", "n", "success_mean", "success_std", "correction_mean"};
    std::vector<std::vector<std::string>> cells;
    std::ostringstream csv;
    csv << "task,method,episodes,n,success_mean,success_std,correction_mean,config_hash,seeds\n";
    for (const auto& [k, grp] : g) {
      std::vector<std::string> row{k[0], k[1], unpad(k[2]), std::to_string(grp.success.size()),
                                   fixed(Group::mean(grp.success)), Group::stddev(grp.success),
                                   fixed(Group::mean(grp.correction))};
      for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
      csv << "," << grp.identity() << "\n";
      cells.push_back(std::move(row));
    }
    std::vector<std::size_t> w(head.size());
    for (std::size_t i = 0; i < head.size(); ++i) {
      w[i] = head[i].size();
      for (const auto& r : cells) w[i] = std::max(w[i], r[i].size());
    }
    std::ostringstream txt;
    for (std::size_t i = 0; i < head.size(); ++i) txt << (i ? "  " : "") << pad(head[i], w[i], i >= 2);
    txt << "\n";
    for (const auto& r : cells) {
      for (std::size_t i = 0; i < r.size(); ++i) txt << (i ? "  " : "") << pad(r[i], w[i], i >= 2);
      txt << "\n";
    }
    files["report_table.txt"] = txt.str();
    files["report_table.csv"] = csv.str();
  }

  // Success against episodes per method.
  {
    const auto g = group_rows(
        rows, [](const RunRecord& r) { return std::vector<std::string>{r.task, method_label(r), episodes_key(r.episodes)}; },
        true);
    std::ostringstream os;
    os << "task,method,episodes,n,success_mean,success_std,config_hash,seeds\n";
    for (const auto& [k, grp] : g)
      os << k[0] << "," << k[1] << "," << unpad(k[2]) << "," << grp.success.size() << ","
         << fixed(Group::mean(grp.success)) << "," << Group::stddev(grp.success) << "," << grp.identity() << "\n";
    files["plot_success_vs_episodes.csv"] = os.str();
  }

  // Feedback-type and warm-start ablation curves.
  {
    const auto g = group_rows(
        rows,
        [](const RunRecord& r) {
          if (r.method != Method::ITeach) return std::vector<std::string>{};
          return std::vector<std::string>{r.task, feedback_label(r.feedback_mode) + (r.warm_start ? "+WS" : ""),
                                          format_double(r.beta_deg), episodes_key(r.episodes)};
        },
        true);
    std::ostringstream os;
    os << "task,configuration,beta,episodes,n,success_mean,success_std,config_hash,seeds\n";
    for (const auto& [k, grp] : g)
      os << k[0] << "," << k[1] << "," << k[2] << "," << unpad(k[3]) << "," << grp.success.size() << ","
         << fixed(Group::mean(grp.success)) << "," << Group::stddev(grp.success) << "," << grp.identity() << "\n";
    files["plot_ablation.csv"] = os.str();
  }

  // Beta sweep: success and correction rate.
  {
    const auto g = group_rows(
        rows,
        [](const RunRecord& r) {
          if (r.method != Method::ITeach || r.feedback_mode != FeedbackMode::Both) return std::vector<std::string>{};
          char beta[32];
          std::snprintf(beta, sizeof beta, "%012.6f", r.beta_deg);
          return std::vector<std::string>{r.task, r.warm_start ? "true" : "false", episodes_key(r.episodes), beta};
        },
        true);
    std::ostringstream os;
    os << "task,warm_start,episodes,beta,n,success_mean,success_std,correction_mean,correction_std,config_hash,seeds\n";
    for (const auto& [k, grp] : g)
      os << k[0] << "," << k[1] << "," << unpad(k[2]) << "," << format_double(std::stod(k[3])) << ","
         << grp.success.size() << "," << fixed(Group::mean(grp.success)) << "," << Group::stddev(grp.success) << ","
         << fixed(Group::mean(grp.correction)) << "," << Group::stddev(grp.correction) << "," << grp.identity()
         << "\n";
    files["plot_beta_sweep.csv"] = os.str();
  }

  fs::create_directories(out_dir);
  ReportFiles out;
  for (const auto& [name, content] : files) {
    const fs::path p = fs::path(out_dir) / name;
    write_file_atomic(p, content);
    out.written.push_back(p.string());
  }
  return out;
}

}  // namespace iteach
