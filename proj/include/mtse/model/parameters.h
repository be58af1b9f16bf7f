// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_MODEL_PARAMETERS_H_
#define MTSE_MODEL_PARAMETERS_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mtse/core/ad.h"
#include "mtse/core/random.h"

namespace mtse {

// Named, insertion-ordered parameter store. Addresses of the contained
// parameters are stable for the lifetime of the set.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet &) = delete;
  ParameterSet &operator=(const ParameterSet &) = delete;

  ad::Parameter &Add(const std::string &name, ad::Matrix init);
  // Uniform(-bound, bound) initialization.
  ad::Parameter &AddUniform(const std::string &name, Eigen::Index rows,
                            Eigen::Index cols, double bound, Rng &rng);
  ad::Parameter &AddConstant(const std::string &name, Eigen::Index rows,
                             Eigen::Index cols, double value);

  ad::Parameter &Get(const std::string &name);
  const ad::Parameter &Get(const std::string &name) const;
  bool Contains(const std::string &name) const;

  const std::vector<std::unique_ptr<ad::Parameter>> &items() const {
    return items_;
  }
  std::size_t size() const { return items_.size(); }
  Eigen::Index TotalSize() const;

  void ZeroGrad();
  double GradNorm() const;
  std::vector<ad::Matrix> Snapshot() const;
  void Restore(const std::vector<ad::Matrix> &values);

  // Flat views used by finite-difference checks and optimizers.
  Eigen::VectorXd FlatValues() const;
  Eigen::VectorXd FlatGrads() const;
  void SetFlatValues(const Eigen::VectorXd &flat);

 private:
  std::vector<std::unique_ptr<ad::Parameter>> items_;
  std::map<std::string, ad::Parameter *> by_name_;
};

}  // namespace mtse

#endif  // MTSE_MODEL_PARAMETERS_H_
