"""Hand transcription of the twelve indicators for the committed fixture.

Regenerate with: python3 metrics_golden.py > metrics_golden.csv
"""
from fractions import Fraction
import math

values = [100, 110, 99, 121]
bench = [100, 105, 101, 110]
ppy = 252

r = [Fraction(values[i + 1], values[i]) - 1 for i in range(3)]
m = [Fraction(bench[i + 1], bench[i]) - 1 for i in range(3)]
n = len(r)


def mean(x):
    return sum(x) / len(x)


def cov(x, y):
    mx, my = mean(x), mean(y)
    return sum((a - mx) * (b - my) for a, b in zip(x, y)) / (len(x) - 1)


tr = Fraction(values[-1] - values[0], values[0])
years = n / ppy
ar = (1 + float(tr)) ** (1 / years) - 1
sharpe = float(mean(r)) / math.sqrt(float(cov(r, r))) * math.sqrt(ppy)
peak, mdd = values[0], 0.0
for v in values:
    peak = max(peak, v)
    mdd = max(mdd, (peak - v) / peak)
# one negative return: downside deviation is zero, so the ratio is undefined
sortino = None
beta = cov(r, m) / cov(m, m)
alpha = float(mean(r) - beta * mean(m)) * ppy
d = [a - b for a, b in zip(r, m)]
ir = float(mean(d)) / math.sqrt(float(cov(d, d)))
calmar = ar / mdd
wr = Fraction(sum(1 for x in r if x > 0), n)
wins = [x for x in r if x > 0]
losses = [x for x in r if x < 0]
plr = float(mean(wins) / abs(mean(losses)))
vol = math.sqrt(float(cov(r, r)))

rows = [("TR", float(tr)), ("AR", ar), ("Sharpe", sharpe), ("MD", -mdd), ("SR", sortino),
        ("Beta", float(beta)), ("Alpha", alpha), ("IR", ir), ("CR", calmar), ("WR", float(wr)),
        ("PLR", plr), ("Volatility", vol)]
print("metric,value")
for name, v in rows:
    print(f"{name},{'NA' if v is None else format(v, '.9f')}")
