"""Hand-computed oracle cases for the quality-dimension formulas.

Each expected value below was worked out by hand (plain arithmetic /
calculator), independently of the implementation, and is asserted to an
absolute tolerance of 1e-12.
"""

# (observed, reference, expected |observed - reference|)
ACCURACY_CASES = [
    (21.5, 21.0, 0.5),
    (20.0, 20.0, 0.0),
    (18.2, 19.7, 1.5),
    (19.7, 18.2, 1.5),
    (0.0, 0.0, 0.0),
    (1.0, -1.0, 2.0),
    (-1.0, 1.0, 2.0),
    (-5.5, -2.0, 3.5),
    (100.0, 99.25, 0.75),
    (0.1, 0.3, 0.2),
    (2.5, 2.5, 0.0),
    (15.0, 14.0, 1.0),
    (14.0, 15.0, 1.0),
    (-40.0, 40.0, 80.0),
    (37.2, 36.9, 0.3),
    (1013.0, 1017.5, 4.5),
    (3.25, 3.125, 0.125),
    (-0.5, 0.5, 1.0),
    (7.0, 0.0, 7.0),
    (0.0, 7.0, 7.0),
    (21.47, 20.0, 1.47),
    (9.99, 10.0, 0.01),
    (55.5, 55.0, 0.5),
    (-10.25, -10.75, 0.5),
    (123.4, 120.0, 3.4),
    (0.001, 0.002, 0.001),
    (500.0, 499.0, 1.0),
    (250.5, 250.0, 0.5),
    (-273.15, -273.0, 0.15),
    (18.0, 21.0, 3.0),
    (33.3, 30.0, 3.3),
    (64.0, 66.0, 2.0),
]

# (window_s, rate_s, missed_n, expected fraction)
COMPLETENESS_CASES = [
    (7200.0, 120.0, 0, 1.0),
    (7200.0, 120.0, 3, 0.95),
    (7200.0, 120.0, 70, 0.0),         # clamp: raw value would be negative
    (7200.0, 120.0, 60, 0.0),
    (7200.0, 120.0, 61, 0.0),         # clamp again
    (7200.0, 120.0, 30, 0.5),
    (7200.0, 120.0, 6, 0.9),
    (7200.0, 120.0, 12, 0.8),
    (7200.0, 120.0, 1, 59.0 / 60.0),
    (7200.0, 120.0, 2, 58.0 / 60.0),
    (7200.0, 240.0, 6, 0.8),
    (7200.0, 60.0, 24, 0.8),
    (3600.0, 60.0, 6, 0.9),
    (3600.0, 60.0, 0, 1.0),
    (3600.0, 60.0, 60, 0.0),
    (3600.0, 120.0, 15, 0.5),
    (3600.0, 300.0, 3, 0.75),
    (600.0, 60.0, 1, 0.9),
    (600.0, 60.0, 5, 0.5),
    (600.0, 60.0, 10, 0.0),
    (600.0, 60.0, 11, 0.0),           # clamp
    (600.0, 150.0, 2, 0.5),
    (1200.0, 120.0, 4, 0.6),
    (1200.0, 100.0, 3, 0.75),
    (1800.0, 450.0, 2, 0.5),
    (1800.0, 180.0, 5, 0.5),
    (900.0, 90.0, 9, 0.1),
    (900.0, 45.0, 10, 0.5),
    (480.0, 120.0, 1, 0.75),
    (480.0, 96.0, 5, 0.0),
    (240.0, 120.0, 1, 0.5),
    (7200.0, 121.0, 0, 1.0),
]

# (alpha, previous_mean_s, raw_s, expected mean_s)
TIMELINESS_CASES = [
    (0.5, 120.0, 124.0, 122.0),
    (1.0, 120.0, 999.0, 120.0),       # alpha = 1 ignores the new sample
    (0.0, 120.0, 124.0, 124.0),       # alpha = 0 keeps only the raw value
    (1.0, 0.0, 50.0, 0.0),
    (0.0, 999.0, 42.0, 42.0),
    (0.5, 0.0, 0.0, 0.0),
    (0.8, 100.0, 200.0, 120.0),
    (0.8, 120.0, 120.0, 120.0),       # fixpoint
    (0.2, 120.0, 120.0, 120.0),
    (0.8, 120.0, 0.0, 96.0),
    (0.25, 40.0, 80.0, 70.0),
    (0.75, 40.0, 80.0, 50.0),
    (0.5, 60.0, 180.0, 120.0),
    (0.5, 180.0, 60.0, 120.0),
    (0.9, 100.0, 0.0, 90.0),
    (0.1, 100.0, 0.0, 10.0),
    (0.8, 150.0, 100.0, 140.0),
    (0.2, 150.0, 100.0, 110.0),
    (0.5, 1.0, 2.0, 1.5),
    (0.5, 2.0, 1.0, 1.5),
    (0.6, 50.0, 100.0, 70.0),
    (0.4, 50.0, 100.0, 80.0),
    (0.8, 60.0, 360.0, 120.0),
    (0.5, 240.0, 120.0, 180.0),
    (0.25, 120.0, 200.0, 180.0),
    (0.75, 200.0, 120.0, 180.0),
    (0.8, 1000.0, 500.0, 900.0),
    (0.2, 1000.0, 500.0, 600.0),
    (0.5, 0.5, 1.5, 1.0),
    (1.0, 77.0, 0.0, 77.0),
    (0.0, 77.0, 0.0, 0.0),
    (0.5, 121.0, 123.0, 122.0),
]

# (assessed value, neighbor values, expected rms deviation)
PRECISION_CASES = [
    (3.0, [2.0, 4.0], 1.0),
    (5.0, [5.0, 5.0, 5.0], 0.0),
    (0.0, [3.0, -3.0, 0.0], 2.449489742783178),   # sqrt(6)
    (0.0, [1.0, 1.0, 1.0, 1.0], 1.0),
    (0.0, [-1.0, -1.0], 1.0),
    (2.0, [4.0], 2.0),
    (4.0, [2.0], 2.0),
    (10.0, [11.0, 9.0, 10.0, 10.0], 0.7071067811865476),  # sqrt(1/2)
    (0.0, [2.0, -2.0], 2.0),
    (1.0, [1.0], 0.0),
    (0.0, [3.0, 4.0], 3.5355339059327378),        # sqrt(25/2)
    (0.0, [6.0, 8.0], 7.0710678118654755),        # sqrt(50)
    (15.0, [15.0, 16.0, 14.0], 0.816496580927726),  # sqrt(2/3)
    (20.0, [22.0, 18.0, 20.0, 20.0], 1.4142135623730951),  # sqrt(2)
    (0.0, [5.0], 5.0),
    (0.0, [-5.0], 5.0),
    (100.0, [101.0, 99.0], 1.0),
    (7.0, [7.0, 7.0, 7.0, 7.0, 7.0], 0.0),
    (0.0, [1.0, 2.0, 3.0], 2.160246899469287),    # sqrt(14/3)
    (1.0, [2.0, 3.0, 4.0], 2.160246899469287),
    (0.0, [0.5, -0.5, 0.5, -0.5], 0.5),
    (10.0, [13.0, 7.0], 3.0),
    (0.0, [9.0, 12.0], 10.606601717798213),       # sqrt(225/2)
    (2.5, [3.5, 1.5, 2.5], 0.816496580927726),
    (-3.0, [-2.0, -4.0], 1.0),
    (-1.0, [1.0, -3.0], 2.0),
    (0.0, [10.0, 10.0, 10.0], 10.0),
    (50.0, [50.0, 50.0, 52.0, 48.0], 1.4142135623730951),
    (0.0, [1.5], 1.5),
    (0.0, [2.0, 2.0, 2.0, 2.0, 1.0], 1.8439088914585775),  # sqrt(17/5)
    (21.5, [21.0, 22.0, 21.5], 0.408248290463863),         # sqrt(1/6)
    (8.0, [6.0, 10.0, 8.0, 8.0], 1.4142135623730951),
]

# (enriched_bytes, raw_bytes, expected percent)
OVERHEAD_CASES = [
    (1339, 1205, 11.120331950207469),   # +134 bytes on a 1205-byte entity
    (1342, 1205, 11.369294605809129),   # +137 bytes
    (1345, 1205, 11.618257261410789),   # +140 bytes
    (1205, 1205, 0.0),
    (2410, 1205, 100.0),
    (110, 100, 10.0),
    (150, 100, 50.0),
    (103, 100, 3.0),
    (100, 100, 0.0),
    (101, 100, 1.0),
    (125, 100, 25.0),
    (175, 100, 75.0),
    (200, 100, 100.0),
    (300, 100, 200.0),
    (220, 200, 10.0),
    (250, 200, 25.0),
    (201, 200, 0.5),
    (240, 160, 50.0),
    (180, 160, 12.5),
    (165, 160, 3.125),
    (1000, 800, 25.0),
    (900, 800, 12.5),
    (850, 800, 6.25),
    (808, 800, 1.0),
    (1210, 1100, 10.0),
    (1320, 1200, 10.0),
    (1500, 1200, 25.0),
    (1230, 1200, 2.5),
    (512, 512, 0.0),
    (640, 512, 25.0),
    (576, 512, 12.5),
    (528, 512, 3.125),
]
