import numpy as np
from hypothesis import strategies as st

from blaschke_lab.moduli import make_standard


@st.composite
def zeros_in_disk(draw, n, rmax=0.8):
    out = []
    for _ in range(n):
        r = draw(st.floats(0.0, rmax))
        t = draw(st.floats(0.0, 1.0))
        out.append(r * np.exp(2j * np.pi * t))
    return out


@st.composite
def blaschke(draw, degrees=(2, 3, 4, 5), rmax=0.8):
    d = draw(st.sampled_from(degrees))
    return make_standard(d, draw(zeros_in_disk(d - 1, rmax)))
