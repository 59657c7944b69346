#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "topomap/layout.hpp"
#include "topomap/matrix.hpp"
#include "topomap/nap.hpp"
#include "topomap/rng.hpp"

namespace topomap {

/// Weights of one attraction/repulsion force: attr uses a, rep = b*exp(-dist/c).
struct ForceWeights {
    double a;
    double b;
    double c;
};

enum class PsoMode { full, local_only };

struct PsoParams {
    int steps = 1000;
    ForceWeights global{1.5, 0.5, 2.0};
    ForceWeights local{1.5, 15.0, 2.0};
    /// Step size; 0 selects 0.05 / N.
    double step_size = 0.0;
    /// Largest displacement of one particle in one step.
    double max_step = 0.1;
    PsoMode mode = PsoMode::full;
    /// Reads the global attraction as a * (1 - dist / max^3) instead of
    /// a * (1 - (dist / max)^3).
    bool max_cubed = false;

    void validate() const;
    double effective_step(std::size_t n) const { return step_size > 0 ? step_size : 0.05 / static_cast<double>(n); }
};

/// Scalar global force for one distance given the largest off-diagonal distance.
double global_force_value(double dist, double max_dist, const ForceWeights& w, bool max_cubed = false);
/// Scalar local force for one Euclidean particle distance.
double local_force_value(double dist, const ForceWeights& w);

/// Pairwise global force from the cosine distance matrix of the profiles.
/// Zero diagonal.
Matrix global_force(const Matrix& nap_dist, const PsoParams& params);

/// Pairwise local force from current particle positions. Zero diagonal.
Matrix local_force(const Coords& coords, const PsoParams& params);

/// (w_g, w_l) at step t of T; w_g + w_l == 1 exactly.
std::pair<double, double> weight_schedule(int t, int total_steps = 1000);

/// Displacement of every particle for one step with force weights (w_g, w_l).
/// Coincident particles get a random, antisymmetric unit direction from rng.
Coords pso_displacements(const Coords& coords, const Matrix* global, const PsoParams& params, double w_g, double w_l,
                         Rng& rng);

/// Runs the force simulation and returns raw (unscaled) particle positions.
Coords pso_run(const Coords& init, const Matrix* nap_dist, const PsoParams& params, std::uint64_t seed);

/// pso_run followed by coordinate scaling.
Layout pso_optimize(const Coords& init, const Matrix* nap_dist, const PsoParams& params, std::uint64_t seed);

/// Uniform random positions in the unit square refined by local-only PSO.
Layout random_baseline(std::size_t n, const PsoParams& params, std::uint64_t seed);

/// Tunable parameters of every engine, with defaults.
struct MethodParams {
    SomParams som;
    GraphParams graph;
    TsneParams tsne;
    UmapParams umap;
    PsoParams pso;
};

/// Base engine, scaling, then local-only PSO.
Layout hybrid_layout(Method base, const NapMatrix& nap, const MethodParams& params, std::uint64_t seed);

/// Any of the twelve methods, returned scaled to the unit square.
Layout make_layout(Method method, const NapMatrix& nap, const MethodParams& params, std::uint64_t seed);

/// Engine behind a hybrid (som_pso -> som, ...); nullopt for non-hybrids.
std::optional<Method> hybrid_base(Method method);

}  // namespace topomap
