"""Reference values computed once with mpmath at 30 digits and frozen here.

Each constant names the closed form it came from.
"""

# expected points in a 6x6 window at intensity 1/pi: 36/pi
MEAN_COUNT_6X6 = 11.4591559026164641753596309628

# Poisson(1) void probability of a disk of radius R: exp(-pi R^2)
POISSON_DISK_VOID = {
    0.5: 0.455938127765996236765921294728,
    1.0: 0.0432139182637722497744177371717,
    1.5: 0.0008514383428051580358524532956,
}

# Poisson(1), one 2x2 square holds at least one point: 1 - exp(-4)
POISSON_SQUARE_OCCUPIED = 0.981684361111265819706281978727

# two-sided 95% standard normal quantile
Z95 = 1.959963984540054
