"""Reference macro-F1 numbers for LSDAN and GRAB.

These two methods are not implemented here; the values below are the means
and standard deviations reported by their authors for the standard label
ratios, kept so the main sweep can print a complete comparison table. Every
row carries ``"external": true`` to make clear it was transcribed, never
computed by this tool.
"""

EXTERNAL_RESULTS = {
    "cora": {
        "lsdan": {"0.001": (81.8, 0.2), "0.002": (82.8, 0.2),
                  "0.005": (86.7, 0.3), "0.01": (87.6, 0.2)},
        "grab": {"0.001": (82.5, 0.3), "0.002": (84.4, 0.3),
                 "0.005": (86.5, 0.2), "0.01": (87.5, 0.2)},
    },
    "pubmed": {
        "lsdan": {"0.001": (69.6, 0.4), "0.002": (71.4, 0.3),
                  "0.005": (72.7, 0.2), "0.01": (75.1, 0.2)},
        "grab": {"0.001": (70.6, 0.3), "0.002": (71.6, 0.4),
                 "0.005": (73.3, 0.2), "0.01": (75.0, 0.3)},
    },
    "citeseer": {
        "lsdan": {"0.001": (62.7, 0.3), "0.002": (63.6, 0.2),
                  "0.005": (65.6, 0.3), "0.01": (70.5, 0.3)},
        "grab": {"0.001": (61.8, 0.4), "0.002": (62.6, 0.3),
                 "0.005": (65.2, 0.3), "0.01": (69.7, 0.4)},
    },
    "dblp": {
        "lsdan": {"0.001": (85.3, 0.2), "0.002": (85.6, 0.2),
                  "0.005": (86.8, 0.2), "0.01": (87.8, 0.2)},
        "grab": {"0.001": (85.0, 0.2), "0.002": (85.7, 0.3),
                 "0.005": (86.8, 0.2), "0.01": (87.8, 0.2)},
    },
}


def external_rows(dataset: str) -> list[dict]:
    """Aggregate-style rows for the given dataset, flagged as external."""
    rows = []
    for method, cells in EXTERNAL_RESULTS.get(dataset, {}).items():
        for ratio, (mean, std) in cells.items():
            rows.append({
                "dataset": dataset, "method": method, "ratio": float(ratio),
                "n": 5, "mean": mean, "std": std, "external": True,
            })
    return rows
