#include "fudnn/report.hpp"

#include <cstdio>
#include <fstream>

#include "fudnn/error.hpp"

namespace fudnn {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kFormat, "cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  require(out.good(), ErrorKind::kFormat, "write failed: " + path.string());
}

} // namespace

std::string fmt_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_results_csv(const std::filesystem::path& path, std::span<const Metrics> metrics) {
  auto out = open_out(path);
  out << "subject,variant,class_set,fold,accuracy\n";
  for (const auto& m : metrics) {
    for (const auto& f : m.folds) {
      out << m.subject << ',' << nn::to_string(m.variant) << ',' << m.class_set << ',' << f.fold + 1 << ','
          << fmt_double(f.accuracy) << '\n';
    }
  }
  finish(out, path);
}

nlohmann::json summary_json(std::span<const Metrics> metrics) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : metrics) {
    nlohmann::json e;
    e["subject"] = m.subject;
    e["variant"] = std::string(nn::to_string(m.variant));
    e["class_set"] = m.class_set;
    e["n_folds"] = m.folds.size();
    e["mean_accuracy"] = m.mean;
    e["sd_accuracy"] = m.sd;
    e["spread"] = "sample standard deviation over folds";
    e["fold_accuracies"] = m.accuracies();
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [k, v] : m.p_values) p["vs " + k] = v;
    e["p_values"] = p;
    e["confusion"] = m.confusion;
    arr.push_back(std::move(e));
  }
  return arr;
}

void write_confusion_csv(const std::filesystem::path& path, const Metrics& m, std::span<const ClassLabel> classes) {
  auto out = open_out(path);
  out << "truth";
  for (auto c : classes) out << ',' << to_string(c);
  out << '\n';
  for (std::size_t i = 0; i < m.confusion.size() && i < classes.size(); ++i) {
    out << to_string(classes[i]);
    for (int v : m.confusion[i]) out << ',' << v;
    out << '\n';
  }
  finish(out, path);
}

void write_history_csv(const std::filesystem::path& path, std::span<const nn::EpochStats> history) {
  auto out = open_out(path);
  out << "epoch,loss,accuracy\n";
  for (const auto& h : history) out << h.epoch << ',' << fmt_double(h.loss, 8) << ',' << fmt_double(h.accuracy) << '\n';
  finish(out, path);
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const Window> windows,
                           const nn::Evaluation& ev, std::span<const ClassLabel> classes) {
  require(windows.size() == ev.predicted.size(), ErrorKind::kContract, "prediction count mismatch");
  auto out = open_out(path);
  out << "subject,trial_id,start,truth,predicted\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out << windows[i].subject_id << ',' << windows[i].trial_id << ',' << windows[i].start << ','
        << to_string(classes[static_cast<std::size_t>(ev.truth[i])]) << ','
        << to_string(classes[static_cast<std::size_t>(ev.predicted[i])]) << '\n';
  }
  finish(out, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kFormat, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

} // namespace fudnn
