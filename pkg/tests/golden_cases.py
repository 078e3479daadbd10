"""CLI invocations pinned by golden files in tests/golden/."""

CASES = {
    "single_exp_guarantee.csv": ["single", "--B", "1000", "--m-mode", "guarantee", "--n", "100000",
                                 "--policy", "exp", "--seed", "42"],
    "single_greedy_full.csv": ["single", "--B", "1000", "--m-mode", "full", "--n", "100000",
                               "--policy", "greedy", "--seed", "42"],
    "single_integer.csv": ["single", "--B", "100", "--n", "5000", "--integer", "--seed", "1"],
    "adversary_greedy.csv": ["adversary", "greedy", "--B", "1024", "--m", "16", "--phases", "10"],
    "adversary_pin.csv": ["adversary", "pin", "--B", "256", "--m", "64", "--n", "5", "--trials", "40",
                          "--seed", "0"],
    "audit.csv": ["audit", "--B", "100", "--n", "2000", "--seed", "3"],
    "network_path3.csv": ["network", "--synthetic", "path:3", "--n", "1000", "--policy", "greedy",
                          "--seed", "7"],
    "network_random_exp.csv": ["network", "--synthetic", "random:200:6:0", "--n", "20000",
                               "--policy", "exp", "--seed", "1"],
}
