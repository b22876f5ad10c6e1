"""Published comparison table: per-domain precision, recall and F1 in the
total and core modes, with 95% bootstrap intervals, for both backends.

Each value is ``(score, lower, upper)``.  ``BOLD`` lists the cells printed
in bold; an average row has no intervals.
"""

MODES = ("total", "core")
METRICS = ("precision", "recall", "f1")
DOMAINS = ("pork", "crop", "dairy")

TABLE = {
    "ns": {
        "pork": {"precision": {"total": (68.5, 58.1, 76.9), "core": (62.4, 51.9, 70.0)},
                 "recall": {"total": (54.6, 46.2, 69.0), "core": (47.9, 40.0, 60.9)},
                 "f1": {"total": (60.6, 51.4, 72.7), "core": (54.0, 45.2, 65.1)}},
        "crop": {"precision": {"total": (63.8, 50.0, 87.8), "core": (61.3, 50.0, 82.1)},
                 "recall": {"total": (42.8, 36.0, 46.8), "core": (38.8, 36.0, 43.8)},
                 "f1": {"total": (50.7, 41.9, 61.0), "core": (46.6, 41.9, 50.5)}},
        "dairy": {"precision": {"total": (67.6, 50.0, 85.7), "core": (63.2, 50.0, 80.0)},
                  "recall": {"total": (36.4, 33.3, 41.9), "core": (31.2, 26.3, 34.1)},
                  "f1": {"total": (46.8, 40.0, 51.7), "core": (41.0, 39.6, 43.4)}},
    },
    "llm": {
        "pork": {"precision": {"total": (73.9, 71.1, 77.1), "core": (69.5, 64.5, 75.8)},
                 "recall": {"total": (65.1, 57.4, 75.0), "core": (61.4, 55.6, 71.8)},
                 "f1": {"total": (68.9, 65.9, 74.2), "core": (64.9, 59.7, 70.0)}},
        "crop": {"precision": {"total": (73.3, 61.9, 83.3), "core": (65.1, 54.3, 77.8)},
                 "recall": {"total": (65.7, 62.5, 69.7), "core": (58.5, 56.0, 60.0)},
                 "f1": {"total": (69.0, 63.4, 72.1), "core": (61.1, 56.7, 65.1)}},
        "dairy": {"precision": {"total": (70.4, 58.8, 82.3), "core": (62.7, 53.5, 77.4)},
                  "recall": {"total": (71.4, 57.6, 87.5), "core": (65.1, 52.9, 80.0)},
                  "f1": {"total": (70.4, 58.2, 77.8), "core": (63.0, 53.2, 69.1)}},
    },
}

AVERAGE = {
    "ns": {"precision": {"total": 66.6, "core": 62.3}, "recall": {"total": 44.6, "core": 39.3},
           "f1": {"total": 52.7, "core": 47.2}},
    "llm": {"precision": {"total": 72.5, "core": 65.8}, "recall": {"total": 67.4, "core": 61.7},
            "f1": {"total": 69.4, "core": 63.0}},
}

# (row, mode, metric) -> backend printed in bold; every other cell is
# plain in both system blocks
BOLD = {(row, mode, metric): "llm" for row in DOMAINS + ("average",) for mode in MODES for metric in METRICS}
BOLD[("dairy", "core", "precision")] = "ns"
