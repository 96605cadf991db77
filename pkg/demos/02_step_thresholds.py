"""Step-size thresholds across theta for a super-linear drift.

Below theta = 1/2 the moment and contraction guarantees hold only under
explicit step-size caps computed from the coefficient certificate; from
theta = 1/2 on, every positive step is admissible.  The caps for the cubic
double-well problem use box-local growth constants, so they are honest
numbers rather than infinities hidden behind a global Lipschitz fiction.
"""

from theta_stationary import ThetaScheme, builtin, max_stable_step, regime_report


def main():
    problem, bounds = builtin("cubic1d")
    print(f"problem: {problem.name}   certificate: mu={bounds.mu}, "
          f"a={bounds.a}, sigma={bounds.sigma}, kappa={bounds.kappa}")
    print()
    print(f"{'theta':>6} | {'h_max (moment)':>15} | {'h_max (contraction)':>20}")
    print("-" * 49)
    for theta in (0.0, 0.25, 0.4, 0.5, 1.0):
        h_m, h_c = max_stable_step(theta, bounds)
        print(f"{theta:>6} | {h_m:>15.6g} | {h_c:>20.6g}")

    print()
    for theta, h in ((0.0, 0.05), (0.0, 0.5), (1.0, 0.5)):
        report = regime_report(ThetaScheme(theta=theta, h=h), bounds)
        verdict = "valid" if report.valid else "invalid"
        print(f"theta={theta}, h={h}: regime={report.regime.name}, {verdict}")
        for reason in report.reasons:
            print(f"    note: {reason}")


if __name__ == "__main__":
    main()
