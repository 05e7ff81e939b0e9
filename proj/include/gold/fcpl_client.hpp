#pragma once

// Client side: fine-grained micro-cluster discovery and the one-shot upload.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "gold/cpl.hpp"
#include "gold/model.hpp"

namespace gold {

struct ClientResult {
  CentroidUpload upload;
  // Kept on the client; maps each local object to its micro-cluster.
  AffiliationMatrix local_assignments;
  std::size_t k_local = 0;
};

inline std::size_t client_k0(std::size_t n, const RunConfig& config) {
  auto k0 = static_cast<std::size_t>(std::llround(config.k0_fraction * static_cast<double>(n)));
  k0 = std::max<std::size_t>(1, k0);
  if (config.max_k0 > 0) k0 = std::min(k0, config.max_k0);
  return std::min(k0, n);
}

inline ClientResult fcpl_fit(const Dataset& local, const RunConfig& config, std::int64_t client_id,
                             Rng& rng) {
  if (local.n() == 0) throw invalid_input("fcpl_fit: empty client dataset");
  local.validate();
  auto cpl = run_cpl(local.values, client_k0(local.n(), config), config, SimilarityMode::raw, rng);

  ClientResult out;
  out.k_local = cpl.k_final;
  out.local_assignments = std::move(cpl.assignments);
  out.upload.client_id = client_id;
  out.upload.k = cpl.k_final;
  out.upload.d = local.d();
  out.upload.centroids = std::move(cpl.centroids);
  return out;
}

inline ClientResult fcpl_fit(const Dataset& local, const RunConfig& config) {
  Rng rng(config.seed);
  return fcpl_fit(local, config, 0, rng);
}

}  // namespace gold
