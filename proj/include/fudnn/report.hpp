#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fudnn/eeg.hpp"
#include "fudnn/experiment.hpp"
#include "fudnn/nn/classifier.hpp"

namespace fudnn {

// Columns: subject,variant,class_set,fold,accuracy (fold is 1-based).
void write_results_csv(const std::filesystem::path& path, std::span<const Metrics> metrics);

// Per-entry mean, sample sd over folds (labelled as such), fold count,
// p-values and the summed confusion matrix.
nlohmann::json summary_json(std::span<const Metrics> metrics);

void write_confusion_csv(const std::filesystem::path& path, const Metrics& m, std::span<const ClassLabel> classes);
void write_history_csv(const std::filesystem::path& path, std::span<const nn::EpochStats> history);
void write_predictions_csv(const std::filesystem::path& path, std::span<const Window> windows,
                           const nn::Evaluation& ev, std::span<const ClassLabel> classes);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Fixed-precision decimal so reruns are byte-identical.
std::string fmt_double(double v, int digits = 6);

} // namespace fudnn
