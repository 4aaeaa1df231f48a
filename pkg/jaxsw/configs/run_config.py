from ml_collections import ConfigDict


def get_estimator_config():
    return ConfigDict(
        dict(
            num_directions=200,
            direction_seed=0,
            restarts=8,
            max_iters=200,
            tol=1e-9,
            optimizer_seed=0,
        )
    )


def get_config(config_string):
    base_run_config = dict(
        seed=None,
        threads=1,
        out=None,
        progress=False,
    )

    base_msw1_config = dict(
        restarts=8,
        max_iters=200,
        tol=1e-9,
    )

    possible_structures = {
        "distance": ConfigDict(
            dict(
                x=None,
                y=None,
                kind="sw",
                p=1.0,
                num_directions=1000,
                # "epsilon=..,delta=.." switches the budget to the planner
                plan=None,
                plan_variant=None,
                # overrides of the estimated planner inputs, "L=..,d=.."
                plan_params=None,
                pilot_directions=100,
                **base_msw1_config,
                **base_run_config,
            )
        ),
        "test": ConfigDict(
            dict(
                x=None,
                y=None,
                statistic="msw1",
                alpha=0.05,
                boot_reps=500,
                num_directions=200,
                **base_msw1_config,
                **base_run_config,
            )
        ),
        "rates": ConfigDict(
            dict(
                spec=None,
                distance="sw1",
                n_grid=[250, 500, 1000, 2000, 4000],
                reps=30,
                ref_size=100_000,
                num_directions=200,
                csv_out=None,
                **base_msw1_config,
                **base_run_config,
            )
        ),
        "limits": ConfigDict(
            dict(
                spec=None,
                spec_nu=None,
                statistic="one_sample_L1",
                reps=2000,
                n=10_000,
                # frozen reference of the empirical statistics
                ref_size=100_000,
                # reference the limit kernels are counted over
                kernel_ref_size=20_000,
                # sphere grid resolution; None uses 64 (d=2) or 256 (d=3)
                resolution=None,
                n_quantiles=60,
                expand=0.1,
                dirs_per_rep=64,
                csv_out=None,
                **base_msw1_config,
                **base_run_config,
            )
        ),
        "brackets": ConfigDict(
            dict(
                M=1.0,
                epsilon=0.5,
                audit_functions=0,
                audit_pieces=64,
                # optional sphere covering and entropy integral inputs
                d=None,
                covering_epsilon=None,
                delta=None,
                m2=0.0,
                m2pd=0.0,
                **base_run_config,
            )
        ),
        "plan": ConfigDict(
            dict(
                variant="sw_pow",
                epsilon=0.1,
                delta=0.05,
                params=None,
                **base_run_config,
            )
        ),
    }

    return possible_structures[config_string]
