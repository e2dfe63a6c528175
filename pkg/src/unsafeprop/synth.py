"""Seeded generator of well-formed random corpora, as mini-language source.

Used by the property and acceptance tests and by ``unsafeprop synth``.
Generated corpora parse, resolve and pass the discipline check: every unsafe
operation sits inside an unsafe block or a declared-unsafe function.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

INTERFACES = {
    # name: (method, unsafe)
    "Shape": ("area", False),
    "Raw": ("poke", True),
}
TYPES = ("Circle", "Square", "Blob")
ABIS = ("C", "intrinsic", "native")
PRIMS = ("@deref_ptr;", "@asm;", "@union_field;")


@dataclass
class _Fn:
    package: str
    name: str
    unsafe: bool = False
    bound: Optional[str] = None  # generic functions take one variable T with this bound
    abi: Optional[str] = None
    impl: Optional[tuple[str, str]] = None  # (interface, type)
    lines: list[str] = field(default_factory=list)

    @property
    def generic(self) -> bool:
        return self.bound is not None

    def ref(self, caller_pkg: str) -> str:
        if self.impl:
            return f"{self.package}::{self.impl[1]}::{self.name}"
        return self.name if self.package == caller_pkg else f"{self.package}::{self.name}"


@dataclass
class SynthConfig:
    max_packages: int = 5
    max_functions: int = 50
    max_calls: int = 150
    p_unsafe_block: float = 0.25
    p_dynamic: float = 0.2
    p_generic: float = 0.2
    p_declared_unsafe: float = 0.15
    p_extern: float = 0.1
    p_indirect: float = 0.05


class _Generator:
    def __init__(self, rng: random.Random, config: SynthConfig):
        self.rng = rng
        self.cfg = config
        self.calls_left = config.max_calls

    def run(self) -> dict[str, str]:
        rng, cfg = self.rng, self.cfg
        n_pkg = rng.randint(1, cfg.max_packages)
        self.pkgs = [f"pkg{i}" for i in range(n_pkg)]
        # every package sees pkg0, where the interfaces and types live
        self.deps = {p: ([] if i == 0 else
                         sorted({"pkg0"} | {q for q in self.pkgs[1:i] if rng.random() < 0.4}))
                     for i, p in enumerate(self.pkgs)}
        self.globals = {p: rng.random() < 0.6 for p in self.pkgs}
        self.impls: dict[tuple[str, str], str] = {}
        for iface in INTERFACES:
            for ty in TYPES:
                if rng.random() < 0.6:
                    self.impls[(iface, ty)] = rng.choice(self.pkgs)
        self.fns: list[_Fn] = []
        for (iface, ty), pkg in sorted(self.impls.items()):
            method, unsafe = INTERFACES[iface]
            self.fns.append(_Fn(pkg, method, unsafe, impl=(iface, ty)))
        n_free = rng.randint(1, max(1, cfg.max_functions - len(self.fns)))
        for i in range(n_free):
            pkg = rng.choice(self.pkgs)
            roll = rng.random()
            if roll < cfg.p_extern:
                self.fns.append(_Fn(pkg, f"ext{i}", True, abi=rng.choice(ABIS)))
                continue
            bound = None
            if rng.random() < cfg.p_generic:
                bound = rng.choice(sorted(INTERFACES))
            self.fns.append(_Fn(pkg, f"f{i}", rng.random() < cfg.p_declared_unsafe, bound))
        order = list(self.fns)
        rng.shuffle(order)
        for fn in order:
            if fn.abi is None:
                fn.lines = self.body(fn)
        return {f"{p}.ml": self.render(p) for p in self.pkgs}

    # -- bodies -------------------------------------------------------------

    def visible(self, fn: _Fn) -> list[_Fn]:
        scope = {fn.package, *self.deps[fn.package]}
        return [g for g in self.fns if g.package in scope and g.impl is None]

    def type_args_for(self, caller: _Fn, callee: _Fn) -> Optional[str]:
        choices = [ty for ty in TYPES if (callee.bound, ty) in self.impls]
        choices.append(f"dyn {callee.bound}")
        if caller.bound == callee.bound:
            choices.append("T")
        return self.rng.choice(choices)

    def call_line(self, fn: _Fn, in_unsafe: bool, lets: list[str]) -> Optional[str]:
        rng = self.rng
        if self.calls_left <= 0:
            return None
        roll = rng.random()
        if roll < self.cfg.p_dynamic:
            iface = rng.choice(sorted(INTERFACES))
            method, unsafe = INTERFACES[iface]
            if unsafe and not in_unsafe:
                return None
            var = f"d{len(lets)}"
            lets.append(f"let {var}: dyn {iface};")
            self.calls_left -= 1
            return f"{var}.{method}();"
        if fn.generic and roll < self.cfg.p_dynamic + 0.15:
            method, unsafe = INTERFACES[fn.bound]
            if unsafe and not in_unsafe:
                return None
            self.calls_left -= 1
            return f"x.{method}();"
        if roll > 1 - self.cfg.p_indirect and fn.impl is None:
            self.calls_left -= 1
            return "indirect fp;"
        candidates = [g for g in self.visible(fn) if in_unsafe or not g.unsafe]
        if not candidates:
            return None
        callee = rng.choice(candidates)
        self.calls_left -= 1
        if callee.generic:
            return f"{callee.ref(fn.package)}::<{self.type_args_for(fn, callee)}>();"
        return f"{callee.ref(fn.package)}();"

    def unsafe_item(self, fn: _Fn, lets: list[str], depth: int) -> list[str]:
        rng = self.rng
        roll = rng.random()
        if roll < 0.35:
            return [rng.choice(PRIMS)]
        if roll < 0.5 and self.globals[fn.package]:
            verb = rng.choice(("@read_global", "@write_global"))
            return [f"{verb} g_{fn.package};"]
        if roll < 0.6 and depth < 2:
            return self.block(fn, lets, depth + 1)
        line = self.call_line(fn, True, lets)
        return [line] if line else []

    def block(self, fn: _Fn, lets: list[str], depth: int = 0) -> list[str]:
        inner: list[str] = []
        for _ in range(self.rng.randint(0, 3)):
            inner.extend(self.unsafe_item(fn, lets, depth))
        return ["unsafe {", *("    " + line for line in inner), "}"]

    def body(self, fn: _Fn) -> list[str]:
        rng = self.rng
        lets: list[str] = []
        stmts: list[str] = []
        for _ in range(rng.randint(0, 5)):
            roll = rng.random()
            if roll < self.cfg.p_unsafe_block:
                stmts.extend(self.block(fn, lets))
            elif fn.unsafe and roll < self.cfg.p_unsafe_block + 0.1:
                stmts.extend(self.unsafe_item(fn, lets, 2))
            else:
                line = self.call_line(fn, fn.unsafe, lets)
                if line:
                    stmts.append(line)
        return lets + stmts

    # -- rendering ----------------------------------------------------------

    def signature(self, fn: _Fn) -> str:
        head = "unsafe fn" if fn.unsafe else "fn"
        if fn.impl:
            return f"{head} {fn.name}(self)"
        generics = f"<T: {fn.bound}>" if fn.generic else ""
        params = "x: T, fp: fnptr" if fn.generic else "fp: fnptr"
        return f"{head} {fn.name}{generics}({params})"

    def render_fn(self, fn: _Fn, pad: str) -> list[str]:
        if not fn.lines:
            return [f"{pad}{self.signature(fn)} {{ }}"]
        return ([f"{pad}{self.signature(fn)} {{"]
                + [f"{pad}    {line}" for line in fn.lines] + [f"{pad}}}"])

    def render(self, pkg: str) -> str:
        out = [f"package {pkg};"]
        out += [f"use {d};" for d in self.deps[pkg]]
        if pkg == "pkg0":
            out += [f"type {ty};" for ty in TYPES]
        if self.globals[pkg]:
            out.append(f"global mut g_{pkg};")
        if pkg == "pkg0":
            for iface, (method, unsafe) in sorted(INTERFACES.items()):
                kw = "unsafe " if unsafe else ""
                out += [f"{kw}interface {iface} {{", f"    {kw}fn {method}(self);", "}"]
        for (iface, ty), owner in sorted(self.impls.items()):
            if owner != pkg:
                continue
            kw = "unsafe " if INTERFACES[iface][1] else ""
            out.append(f"{kw}impl {iface} for {ty} {{")
            for fn in self.fns:
                if fn.impl == (iface, ty):
                    out += self.render_fn(fn, "    ")
            out.append("}")
        for fn in self.fns:
            if fn.package != pkg or fn.impl:
                continue
            if fn.abi:
                out.append(f'extern "{fn.abi}" fn {fn.name}();')
            else:
                out += self.render_fn(fn, "")
        return "\n".join(out) + "\n"


def random_corpus(seed: int, config: Optional[SynthConfig] = None) -> dict[str, str]:
    """Source files of a random well-formed corpus, deterministic in ``seed``."""
    return _Generator(random.Random(seed), config or SynthConfig()).run()
