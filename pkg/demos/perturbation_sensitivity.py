"""How fragile is the quench time to tiny solution perturbations?

Injects additive noise of magnitude 10^-n into the solution once it first
crosses 0.9, for several n, and compares quench time, final field, and
quench location against the unperturbed baseline.  A few minutes on one
core at this resolution.
"""

from qadi.experiments import PerturbSpec, monte_carlo
from qadi.geometry import ellipse_from_area
from qadi.solver import RunConfig
from qadi.stepper import StepConfig


def main() -> None:
    config = RunConfig(
        ellipse=ellipse_from_area(ratio=2.0 / 3.0, area=8.4),
        n_mu=10,
        n_theta=11,
        step=StepConfig(tau0=1e-4, tau_min=1e-4),
        t_max=5.0,
        seed=42,
        # Injected noise legitimately decreases components; keep the
        # monotonicity guard out of the way for perturbed runs.
        mono_tol=-1.0,
    )
    print(f"{'n':>4} {'mean |T - T~|/T':>16} {'mean ||v - v~||':>16} "
          f"{'modal location':>18}")
    for order in (15, 10, 5, 3, 2):
        spec = PerturbSpec(order=order, replicates=10, seed=config.seed)
        stats = monte_carlo(config, spec)
        x, y = stats.modal_location
        print(f"{order:>4} {stats.mean_rel_time_diff:>16.3e} "
              f"{stats.mean_field_diff:>16.3e} {f'({x:.3f}, {y:.3f})':>18}")
    print("\nSmaller n means larger noise; the field difference tracks the "
          "noise floor until it dominates the dynamics.")


if __name__ == "__main__":
    main()
