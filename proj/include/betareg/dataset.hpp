#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "betareg/error.hpp"
#include "betareg/formula.hpp"

namespace betareg {

// Response in (0,1) plus named covariate columns of equal length.
struct Dataset {
  Eigen::VectorXd response;
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;
  std::string provenance;

  std::size_t n() const noexcept { return static_cast<std::size_t>(response.size()); }
  const std::vector<std::string>& schema() const noexcept { return names; }

  void add_column(std::string name, Eigen::VectorXd values) {
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw DataError("duplicate column '" + name + "'");
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  const Eigen::VectorXd& column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("no column named '" + name + "'");
    return columns[static_cast<std::size_t>(it - names.begin())];
  }

  // Checks the dataset invariants; lists every out-of-support response.
  void validate() const {
    if (response.size() == 0) throw DataError("dataset is empty");
    std::string bad;
    std::size_t count = 0;
    for (Eigen::Index t = 0; t < response.size(); ++t) {
      const double y = response[t];
      if (!(y > 0.0 && y < 1.0)) {
        if (count < 20) bad += (bad.empty() ? "" : ", ") + std::to_string(t + 1);
        ++count;
      }
    }
    if (count > 0)
      throw DataError("response must lie strictly inside (0,1); offending rows: " + bad +
                      (count > 20 ? ", ..." : ""));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].size() != response.size())
        throw DataError("column '" + names[j] + "' has wrong length");
      for (Eigen::Index t = 0; t < columns[j].size(); ++t)
        if (!std::isfinite(columns[j][t]))
          throw DataError("non-finite value in column '" + names[j] + "' at row " +
                          std::to_string(t + 1));
    }
  }
};

// Gathers the covariates a predictor references, in its slot order.
inline CovariateBlock bind_covariates(const PredictorSpec& spec, const Dataset& data) {
  CovariateBlock block(static_cast<Eigen::Index>(data.n()),
                       static_cast<Eigen::Index>(spec.covariate_count()));
  for (std::size_t j = 0; j < spec.covariate_count(); ++j)
    block.col(static_cast<Eigen::Index>(j)) = data.column(spec.covariate_names[j]).array();
  return block;
}

}  // namespace betareg
