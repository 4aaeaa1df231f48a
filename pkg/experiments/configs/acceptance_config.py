from ml_collections import ConfigDict


def get_config(config_string):
    base_config = dict(seed=20240101, threads=1)

    possible_structures = {
        "ot1d_oracle": ConfigDict(
            dict(experiment="ot1d_oracle", instances=500, max_points=6, p_values=[1.0, 1.5, 2.0, 3.0], **base_config)
        ),
        "coverage": ConfigDict(
            dict(
                experiment="coverage",
                x=[0.0, 0.0],
                y=[1.0, 0.5],
                epsilon=0.05,
                delta=0.1,
                runs=200,
                reference_resolution=20_000,
                **base_config,
            )
        ),
        "tilde_identity": ConfigDict(
            dict(
                experiment="tilde_identity",
                dims=list(range(1, 51)),
                d=3,
                n=500,
                shift=[1.0, 0.0, 0.0],
                num_directions=10_000,
                **base_config,
            )
        ),
        "msw1_grid": ConfigDict(
            dict(
                experiment="msw1_grid",
                instances=50,
                points=50,
                resolution=2000,
                shift=[1.0, 1.0],
                shift_samples=5000,
                shift_tolerance=0.05,
                restarts=8,
                max_iters=200,
                **base_config,
            )
        ),
        "sandwich": ConfigDict(
            dict(experiment="sandwich", instances=200, max_points=6, d=3, num_directions=2000, **base_config)
        ),
        "rates": ConfigDict(
            dict(
                experiment="rates",
                dim=3,
                n_grid=[250, 500, 1000, 2000, 4000],
                reps=30,
                ref_size=100_000,
                num_directions=200,
                restarts=4,
                max_iters=100,
                slope_range=[-0.6, -0.4],
                **base_config,
            )
        ),
        "limit_law": ConfigDict(
            dict(
                experiment="limit_law",
                draws=2000,
                n=10_000,
                kernel_ref_size=20_000,
                ref_size=100_000,
                n_quantiles=60,
                expand=0.1,
                ks_tolerance=0.1,
                ks_tolerance_1d=0.05,
                truncation_tolerance=0.01,
                **base_config,
            )
        ),
        "bootstrap": ConfigDict(
            dict(
                experiment="bootstrap",
                statistics=["sw1", "msw1"],
                m=200,
                alpha=0.05,
                boot_reps=200,
                null_runs=500,
                alt_runs=200,
                shift=1.0,
                max_null_rate=0.08,
                min_power=0.9,
                num_directions=100,
                restarts=4,
                max_iters=100,
                **base_config,
            )
        ),
        "brackets": ConfigDict(
            dict(
                experiment="brackets",
                cases=[[1.0, 1.0], [1.0, 0.5], [2.0, 0.5]],
                functions=1000,
                pieces=97,
                **base_config,
            )
        ),
        "concentration": ConfigDict(
            dict(
                experiment="concentration",
                n_values=[10, 100, 1000],
                t_values=[0.0, 0.1, 0.5, 1.0],
                sigma2_values=[0.5, 1.0, 2.0],
                d_values=[1, 2, 5],
                **base_config,
            )
        ),
    }

    return possible_structures[config_string]
