"""Look up two-stage training schedules for the downstream task model.

The pretrain stage runs on synthetic dialogues, the finetune stage on the
human dialogues; step counts come from a fixed lookup table, with an
explicit extrapolation fallback for off-table sizes.
"""

from autoconv import training_schedule


def main():
    print("=== table entries ===")
    rows = [(50, 250), (100, 500), (200, 1000), (500, 2000), (50, 20000)]
    print(f"  {'human':>6} {'synthetic':>10} {'pretrain':>9} {'finetune':>9}")
    for human, synthetic in rows:
        s = training_schedule(human, synthetic)
        print(f"  {human:>6} {synthetic:>10} {s.pretrain_steps:>9} {s.finetune_steps:>9}")

    print("\n=== extrapolated fallback ===")
    for human, synthetic in ((75, 300), (50, 50000)):
        s = training_schedule(human, synthetic)
        print(
            f"  human={human} synthetic={synthetic} -> "
            f"pretrain={s.pretrain_steps} finetune={s.finetune_steps} "
            f"(extrapolated={s.extrapolated})"
        )

    print("\nscale rule of thumb: finetune 4x human; pretrain 2x synthetic above 1K")


if __name__ == "__main__":
    main()
