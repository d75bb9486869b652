#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fq/experiment.hpp"

namespace fq {

/// Plot-data tables for one figure, keyed by file name. Throws
/// std::invalid_argument naming the sweep axis the record lacks:
///   fig4: Q and MI against modulation order, one pair of files per power
///   fig5: Q and MI against launch power, one pair of files per order
///   fig6: per-epoch MI per learning rate, one file per (order, power, lr)
std::map<std::string, std::string> figure_tables(const RunRecord& record, const std::string& figure);

/// Writes figure_tables into out_dir. Nothing is written when the record
/// cannot produce the figure.
std::vector<std::filesystem::path> emit_figure_data(const RunRecord& record, const std::string& figure,
                                                    const std::filesystem::path& out_dir);

}  // namespace fq
