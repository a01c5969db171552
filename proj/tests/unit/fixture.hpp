#pragma once

#include <kickns/grid_field.hpp>
#include <kickns/noise.hpp>
#include <kickns/ns_solver.hpp>

#include <memory>

namespace kickns::test {

/// Default 32x32 setup shared by the tests that need the kicked solver.
struct Flow {
    DomainSpec domain = DomainSpec::make(32, 32, 0.05);
    NoiseModel noise = NoiseModel::build({});
    NavierStokesSolver solver{domain, noise};
    std::shared_ptr<const StokesBasis> basis = std::make_shared<StokesBasis>(stokes_basis(domain, 16));

    static const Flow& get() {
        static const Flow f;
        return f;
    }

    VelocityField smooth(double radius, std::uint64_t seed) const {
        Stream rng(seed, 99);
        return random_smooth_state(*basis, basis->size(), radius, rng);
    }
};

}  // namespace kickns::test
