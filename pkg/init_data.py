"""
Seed demo datasets into the data directory
Writes one Example 1, one Example 2 and both grape-shaped datasets with the
same writers the `simulate` command uses.
"""

from pathlib import Path

from config import DATA_DIR, setup_logging
from simgen import example1_spec, example2_spec, grape_like_spec, simulate
import storage

DEMO_SEED = 2024


def init_demo_data(root=DATA_DIR):
    """Simulate the demo datasets under `root`"""
    root = Path(root)
    print("Seeding demo datasets...")
    specs = {
        'example1': example1_spec(20, 1.0, DEMO_SEED),
        'example2': example2_spec('V2', DEMO_SEED),
        'grape_vineyard': grape_like_spec('vineyard', DEMO_SEED),
        'grape_temperature': grape_like_spec('temperature', DEMO_SEED),
    }
    written = {}
    for name, spec in specs.items():
        out = simulate(spec)
        storage.save_sim_output(root / name, out)
        written[name] = root / name
        print(f"✓ {name}: n={spec.n}, p={spec.p}, m={spec.m} -> {root / name}")

    print("\n" + "=" * 60)
    print("Demo data ready!")
    print("=" * 60)
    return written


if __name__ == '__main__':
    setup_logging()
    init_demo_data()
