#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "greybox/signals.hpp"

namespace greybox {

/// CSV with header `time,u1..um,y1..yl`, one row per sample, plus a sidecar
/// JSON next to it (same stem, .json) holding fs, N, P and channel names.
void write_record_csv(const std::filesystem::path& csv, const TimeRecord& record,
                      const std::vector<std::string>& input_names = {},
                      const std::vector<std::string>& output_names = {});
TimeRecord read_record_csv(const std::filesystem::path& csv);

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// `line,freq_hz,channel,re,im`
void write_spectrum_csv(const std::filesystem::path& csv, const SpectrumSet& spectrum, double fs);

/// Plain numeric table with a header row.
void write_table_csv(const std::filesystem::path& csv, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);

}  // namespace greybox
