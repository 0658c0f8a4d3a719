#include "greybox/record_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "greybox/model_io.hpp"

namespace greybox {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".json");
}

void write_record_csv(const std::filesystem::path& csv, const TimeRecord& record,
                      const std::vector<std::string>& input_names,
                      const std::vector<std::string>& output_names) {
  record.validate();
  auto out = open_out(csv);
  out << "time";
  for (int i = 0; i < record.inputs(); ++i) out << ",u" << i + 1;
  for (int i = 0; i < record.outputs(); ++i) out << ",y" << i + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < record.samples(); ++t) {
    out << static_cast<double>(t) / record.fs;
    for (int i = 0; i < record.inputs(); ++i) out << ',' << record.u(i, t);
    for (int i = 0; i < record.outputs(); ++i) out << ',' << record.y(i, t);
    out << '\n';
  }
  nlohmann::json meta = {{"fs", record.fs}, {"N", record.N}, {"P", record.P}};
  auto names = [](const std::vector<std::string>& given, int count, const char* prefix) {
    std::vector<std::string> out = given;
    for (int i = static_cast<int>(out.size()); i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
  };
  meta["inputs"] = names(input_names, record.inputs(), "u");
  meta["outputs"] = names(output_names, record.outputs(), "y");
  write_json_file(sidecar_path(csv), meta);
}

TimeRecord read_record_csv(const std::filesystem::path& csv) {
  const auto meta = read_json_file(sidecar_path(csv));
  TimeRecord record;
  try {
    record.fs = meta.at("fs").get<double>();
    record.N = meta.at("N").get<int>();
    record.P = meta.at("P").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(sidecar_path(csv).string() + ": " + e.what());
  }
  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(csv.string() + ": empty file");
  const auto header = split(line);
  int m = 0;
  int l = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (!header[c].empty() && header[c][0] == 'u') ++m;
    else if (!header[c].empty() && header[c][0] == 'y') ++l;
  }
  if (header.empty() || header[0] != "time" || m < 1 || l < 1 ||
      header.size() != static_cast<std::size_t>(1 + m + l)) {
    throw ConfigError(csv.string() + ":1: header must be time,u1..um,y1..yl");
  }
  const Eigen::Index T = static_cast<Eigen::Index>(record.N) * record.P;
  record.u.resize(m, T);
  record.y.resize(l, T);
  Eigen::Index t = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size() || t >= T) {
      throw ConfigError(csv.string() + ":" + std::to_string(line_no) + ": unexpected row");
    }
    try {
      for (int i = 0; i < m; ++i) record.u(i, t) = std::stod(cells[1 + i]);
      for (int i = 0; i < l; ++i) record.y(i, t) = std::stod(cells[1 + m + i]);
    } catch (const std::exception&) {
      throw ConfigError(csv.string() + ":" + std::to_string(line_no) + ": non-numeric value");
    }
    ++t;
  }
  if (t != T) {
    throw ConfigError(csv.string() + ": expected " + std::to_string(T) + " samples, found " + std::to_string(t));
  }
  record.validate();
  return record;
}

void write_spectrum_csv(const std::filesystem::path& csv, const SpectrumSet& spectrum, double fs) {
  auto out = open_out(csv);
  out << "line,freq_hz,channel,re,im\n";
  for (int c = 0; c < spectrum.channels(); ++c) {
    for (int i = 0; i < spectrum.size(); ++i) {
      const int k = spectrum.lines[i];
      const auto v = spectrum.values(c, i);
      out << k << ',' << k * fs / spectrum.N << ',' << c + 1 << ',' << v.real() << ',' << v.imag() << '\n';
    }
  }
}

void write_table_csv(const std::filesystem::path& csv, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  auto out = open_out(csv);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace greybox
