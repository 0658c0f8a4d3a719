#include "greybox/model_io.hpp"

#include <fstream>

namespace greybox {

using nlohmann::json;

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw ConfigError(std::string(what) + ": expected an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(std::string(what) + ": ragged row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ConfigError(std::string(what) + ": non-numeric entry at (" + std::to_string(r) +
                          "," + std::to_string(c) + ")");
      }
      M(r, c) = row[c].get<double>();
    }
  }
  return M;
}

json mask_to_json(const Mask& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

Mask mask_from_json(const json& j, const char* what) {
  const Matrix values = matrix_from_json(j, what);
  return values.array() != 0.0;
}

json basis_to_json(const BasisSet& basis) {
  json terms = json::array();
  for (const auto& t : basis.terms) {
    if (t.function) {
      throw ConfigError("basis term '" + t.label() + "' uses a custom function and cannot be serialised");
    }
    terms.push_back({{"channel", t.channel},
                     {"signal", t.signal == BasisSignal::velocity ? "velocity" : "displacement"},
                     {"exponent", t.exponent}});
  }
  return terms;
}

BasisSet basis_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("basis: expected an array of terms");
  BasisSet basis;
  for (const auto& item : j) {
    BasisTerm t;
    t.channel = item.at("channel").get<int>();
    t.exponent = item.at("exponent").get<int>();
    const std::string signal = item.value("signal", "displacement");
    if (signal == "velocity") {
      t.signal = BasisSignal::velocity;
    } else if (signal == "displacement") {
      t.signal = BasisSignal::displacement;
    } else {
      throw ConfigError("basis: unknown signal '" + signal + "'");
    }
    basis.terms.push_back(t);
  }
  return basis;
}

json model_to_json(const GreyBoxModel& model, const std::optional<ParameterMask>& mask) {
  const auto& d = model.dims;
  json j = {{"dims", {{"n_s", d.n_s}, {"m", d.m}, {"l", d.l}, {"s", d.s}}},
            {"Ts", model.Ts},
            {"basis", basis_to_json(model.basis)},
            {"A", matrix_to_json(model.A)},
            {"Bext", matrix_to_json(model.Bext)},
            {"C", matrix_to_json(model.C)},
            {"Dext", matrix_to_json(model.Dext)}};
  if (mask) {
    j["mask"] = {{"A", mask_to_json(mask->A)},
                 {"Bext", mask_to_json(mask->Bext)},
                 {"C", mask_to_json(mask->C)},
                 {"Dext", mask_to_json(mask->Dext)}};
  }
  return j;
}

GreyBoxModel model_from_json(const json& j) {
  try {
    GreyBoxModel model;
    const auto& d = j.at("dims");
    model.dims.n_s = d.at("n_s").get<int>();
    model.dims.m = d.at("m").get<int>();
    model.dims.l = d.at("l").get<int>();
    model.dims.s = d.at("s").get<int>();
    model.Ts = j.at("Ts").get<double>();
    model.basis = basis_from_json(j.at("basis"));
    model.A = matrix_from_json(j.at("A"), "A");
    model.Bext = matrix_from_json(j.at("Bext"), "Bext");
    model.C = matrix_from_json(j.at("C"), "C");
    model.Dext = matrix_from_json(j.at("Dext"), "Dext");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
}

ParameterMask mask_from_model_json(const json& j, const Dimensions& dims) {
  if (!j.contains("mask")) return ParameterMask::defaults(dims);
  const auto& mj = j.at("mask");
  ParameterMask mask{mask_from_json(mj.at("A"), "mask.A"), mask_from_json(mj.at("Bext"), "mask.Bext"),
                     mask_from_json(mj.at("C"), "mask.C"), mask_from_json(mj.at("Dext"), "mask.Dext")};
  try {
    mask.check(dims);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
  return mask;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_model(const std::filesystem::path& path, const GreyBoxModel& model,
                const std::optional<ParameterMask>& mask) {
  write_json_file(path, model_to_json(model, mask));
}

GreyBoxModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace greybox
