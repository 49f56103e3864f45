"""Compiled inner loops for the truncated-binomial chain.

Each chain step consumes one 64-bit word, passed in as a signed int64:
the top two bits pick the move, the low 62 bits are the leading bits of
the uniform that decides acceptance.  Acceptance ratios are exact integer
fractions compared against the uniform by lazy binary expansion, so no
rounding enters.  When 62 bits are not enough to decide (probability
below 2**-61) the kernels stop and report the step index, and the caller
finishes that step with more bits.

The plain functions below run on Python integers when the ratio terms
would overflow int64; :data:`jit` holds compiled twins of the same code.
"""

import types

from numba import njit

MASK62 = (1 << 62) - 1
INT64_SAFE = 1 << 62

# forward-coupling status codes
RUNNING = 0
COALESCED = 1
UNDECIDED = 2


def below(u, num, den):
    """1 if U < num/den, 0 if not, -1 if the 62-bit prefix ``u`` ties."""
    if num <= 0:
        return 0
    if num >= den:
        return 1
    rem = num
    for i in range(61, -1, -1):
        rem = rem * 2
        pbit = 0
        if rem >= den:
            pbit = 1
            rem -= den
        ubit = (u >> i) & 1
        if ubit != pbit:
            if ubit < pbit:
                return 1
            return 0
        if rem == 0:
            return 0
    return -1


def accept_up(k, u, n, a, c, mubar, hi):
    # alpha+(k) = ((n - k) a) / ((k + 1) c), c = b - a for p = a / b
    if k == hi:
        return 0
    if k < mubar:
        return 1
    return below(u, (n - k) * a, (k + 1) * c)


def accept_down(k, u, n, a, c, mubar, lo):
    # alpha-(k) = (k c) / ((n - k + 1) a)
    if k == lo:
        return 0
    if k > mubar:
        return 1
    return below(u, k * c, (n - k + 1) * a)


def grand_step(w, top, bot, n, a, c, mubar, lo, hi):
    """One shared-word update of the top and bottom chains.

    Returns ``(ok, top, bot)``; ``ok`` is 0 when the step is undecided and
    the states are returned unchanged.
    """
    branch = (w >> 62) & 3
    if branch < 2:
        return 1, top, bot
    u = w & MASK62
    if branch == 2:
        rt = accept_up(top, u, n, a, c, mubar, hi)
        rb = accept_up(bot, u, n, a, c, mubar, hi)
        if rt < 0 or rb < 0:
            return 0, top, bot
        return 1, top + rt, bot + rb
    rt = accept_down(top, u, n, a, c, mubar, lo)
    rb = accept_down(bot, u, n, a, c, mubar, lo)
    if rt < 0 or rb < 0:
        return 0, top, bot
    return 1, top - rt, bot - rb


def grand_sweep(words, top, bot, n, a, c, mubar, lo, hi):
    """Drive the top and bottom chains with shared words, in time order.

    Returns ``(stop, top, bot, violations)``; ``stop`` is -1 when every
    word was applied, else the index of an undecided step (not applied).
    """
    violations = 0
    for t in range(len(words)):
        ok, top, bot = grand_step(words[t], top, bot, n, a, c, mubar, lo, hi)
        if ok == 0:
            return t, top, bot, violations
        if bot < lo or top < bot or top > hi:
            violations += 1
    return -1, top, bot, violations


def cftp_cached(past, depth, n, a, c, mubar, lo, hi):
    """Backward runs of depth ``depth``, ``2 depth + 1``, ... over cached words.

    ``past[i]`` drives the step ending at time ``-i``.  Returns
    ``(status, value, depth, updates, violations)``: COALESCED with the
    common value, RUNNING when ``depth`` outgrew the cache, or UNDECIDED
    when a step at this depth needs more bits.
    """
    updates = 0
    violations = 0
    while depth <= len(past):
        top = hi
        bot = lo
        for i in range(depth - 1, -1, -1):
            ok, top, bot = grand_step(past[i], top, bot, n, a, c, mubar, lo, hi)
            if ok == 0:
                return UNDECIDED, 0, depth, updates, violations
            if bot < lo or top < bot or top > hi:
                violations += 1
        updates += depth
        if top == bot:
            return COALESCED, top, depth, updates, violations
        depth = 2 * depth + 1
    return RUNNING, 0, depth, updates, violations


def forward_sweep(words, x, y, n, a, c, mubar, lo, hi):
    """Single-coordinate coupling: bit 63 picks X (1) or Y (0), bit 62 down.

    Returns ``(status, t, x, y, violations)`` where ``t`` counts words
    consumed (including the coalescing one, excluding an undecided one).
    """
    violations = 0
    for t in range(len(words)):
        w = words[t]
        sel = (w >> 63) & 1
        down = (w >> 62) & 1
        u = w & MASK62
        k = y
        if sel == 1:
            k = x
        if down == 1:
            r = accept_down(k, u, n, a, c, mubar, lo)
        else:
            r = accept_up(k, u, n, a, c, mubar, hi)
        if r < 0:
            return UNDECIDED, t, x, y, violations
        if r == 1:
            step = 1
            if down == 1:
                step = -1
            if sel == 1:
                x += step
            else:
                y += step
        if y < lo or x < y or x > hi:
            violations += 1
        if x == y:
            return COALESCED, t + 1, x, y, violations
    return RUNNING, len(words), x, y, violations


def _compile(names):
    space = {"MASK62": MASK62, "RUNNING": RUNNING, "COALESCED": COALESCED, "UNDECIDED": UNDECIDED}
    for name in names:
        fn = globals()[name]
        twin = types.FunctionType(fn.__code__, space, name, fn.__defaults__)
        twin.__module__ = __name__
        twin.__qualname__ = "jit_" + name
        space[name] = njit(cache=True, nogil=True)(twin)
    return types.SimpleNamespace(**{name: space[name] for name in names})


jit = _compile(["below", "accept_up", "accept_down", "grand_step", "grand_sweep", "cftp_cached", "forward_sweep"])
