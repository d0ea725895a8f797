#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <vector>

#include "bchaz/bchaz.hpp"
#include "oracles.hpp"

namespace testutil {

inline bchaz::SurvivalDataset make_dataset(std::vector<double> time, std::vector<int> status,
                                           std::vector<std::vector<double>> z) {
  bchaz::SurvivalDataset d;
  d.time = std::move(time);
  d.status = std::move(status);
  for (const auto& row : z) d.covariates.append_row(row);
  for (std::size_t c = 0; c < d.covariates.cols(); ++c) d.covariate_names.push_back("z" + std::to_string(c + 1));
  return d;
}

inline std::vector<oracle::Subject> to_oracle(const bchaz::SurvivalDataset& d) {
  std::vector<oracle::Subject> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto r = d.covariates.row(i);
    out.push_back({d.time[i], d.status[i], {r.begin(), r.end()}});
  }
  return out;
}

/// Random small instance: n subjects, J intervals, p covariates in (-1, 1),
/// every time inside the partition.
struct Instance {
  bchaz::SurvivalDataset data;
  bchaz::TimePartition partition;
  bchaz::ParameterState state;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t J, std::size_t p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  in.partition.cuts = {0.0};
  for (std::size_t j = 0; j < J; ++j) in.partition.cuts.push_back(in.partition.cuts.back() + 0.2 + u(rng));
  std::vector<double> time;
  std::vector<int> status;
  std::vector<std::vector<double>> z;
  for (std::size_t i = 0; i < n; ++i) {
    time.push_back(u(rng) * in.partition.end() * 0.999);
    status.push_back(u(rng) < 0.7 ? 1 : 0);
    std::vector<double> row;
    for (std::size_t l = 0; l < p; ++l) row.push_back(2.0 * u(rng) - 1.0);
    z.push_back(row);
  }
  in.data = make_dataset(time, status, z);
  for (std::size_t l = 0; l < p; ++l) in.state.beta.push_back(u(rng) - 0.5);
  for (std::size_t j = 0; j < J; ++j) in.state.lambda.push_back(0.2 + 2.0 * u(rng));
  return in;
}

/// Chain assembled by hand from explicit states, log-likelihoods filled in.
inline bchaz::ChainOutput manual_chain(const bchaz::TimePartition& part, double gamma,
                                       const std::vector<bchaz::ParameterState>& states,
                                       const bchaz::SurvivalDataset& data) {
  bchaz::ChainOutput c;
  c.config = bchaz::ModelConfig::defaults(data.num_covariates(), gamma);
  c.partition = part;
  c.p = data.num_covariates();
  c.J = part.intervals();
  const bchaz::PiecewiseLikelihood lik(data, part, gamma);
  for (std::size_t m = 0; m < states.size(); ++m) c.append(states[m], lik.log_likelihood(states[m]), m + 1);
  return c;
}

}  // namespace testutil
