// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/model/parameters.h"

#include <cmath>

#include "mtse/core/errors.h"

namespace mtse {

ad::Parameter &ParameterSet::Add(const std::string &name, ad::Matrix init) {
  MTSE_REQUIRE(!Contains(name), ConfigError, "duplicate parameter " + name);
  auto p = std::make_unique<ad::Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->ZeroGrad();
  ad::Parameter *raw = p.get();
  items_.push_back(std::move(p));
  by_name_[name] = raw;
  return *raw;
}

ad::Parameter &ParameterSet::AddUniform(const std::string &name,
                                        Eigen::Index rows, Eigen::Index cols,
                                        double bound, Rng &rng) {
  ad::Matrix m(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return Add(name, std::move(m));
}

ad::Parameter &ParameterSet::AddConstant(const std::string &name,
                                         Eigen::Index rows, Eigen::Index cols,
                                         double value) {
  return Add(name, ad::Matrix::Constant(rows, cols, value));
}

ad::Parameter &ParameterSet::Get(const std::string &name) {
  auto it = by_name_.find(name);
  MTSE_REQUIRE(it != by_name_.end(), ConfigError, "no parameter " + name);
  return *it->second;
}

const ad::Parameter &ParameterSet::Get(const std::string &name) const {
  auto it = by_name_.find(name);
  MTSE_REQUIRE(it != by_name_.end(), ConfigError, "no parameter " + name);
  return *it->second;
}

bool ParameterSet::Contains(const std::string &name) const {
  return by_name_.count(name) != 0;
}

Eigen::Index ParameterSet::TotalSize() const {
  Eigen::Index n = 0;
  for (const auto &p : items_) n += p->size();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto &p : items_) p->ZeroGrad();
}

double ParameterSet::GradNorm() const {
  double sq = 0;
  for (const auto &p : items_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

std::vector<ad::Matrix> ParameterSet::Snapshot() const {
  std::vector<ad::Matrix> out;
  out.reserve(items_.size());
  for (const auto &p : items_) out.push_back(p->value);
  return out;
}

void ParameterSet::Restore(const std::vector<ad::Matrix> &values) {
  MTSE_REQUIRE(values.size() == items_.size(), InvalidInput,
               "snapshot size mismatch");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    MTSE_REQUIRE(values[i].rows() == items_[i]->value.rows() &&
                     values[i].cols() == items_[i]->value.cols(),
                 InvalidInput, "snapshot shape mismatch for " + items_[i]->name);
    items_[i]->value = values[i];
  }
}

Eigen::VectorXd ParameterSet::FlatValues() const {
  Eigen::VectorXd flat(TotalSize());
  Eigen::Index k = 0;
  for (const auto &p : items_) {
    flat.segment(k, p->size()) = p->value.reshaped();
    k += p->size();
  }
  return flat;
}

Eigen::VectorXd ParameterSet::FlatGrads() const {
  Eigen::VectorXd flat(TotalSize());
  Eigen::Index k = 0;
  for (const auto &p : items_) {
    flat.segment(k, p->size()) = p->grad.reshaped();
    k += p->size();
  }
  return flat;
}

void ParameterSet::SetFlatValues(const Eigen::VectorXd &flat) {
  MTSE_REQUIRE(flat.size() == TotalSize(), InvalidInput, "flat size mismatch");
  Eigen::Index k = 0;
  for (auto &p : items_) {
    p->value.reshaped() = flat.segment(k, p->size());
    k += p->size();
  }
}

}  // namespace mtse
