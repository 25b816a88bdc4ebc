"""Synthetic files shaped like the circuit and call-record samples.

Row contents are generated from a seed; a filler run at the end of each row
brings the file to an exact byte size.
"""

import random

CIRCUITS_HEADER = [
    '"Order ID"', '"Order Number"', '"vendor"', '"Circuit ID"', '"FOC Received Date"',
    '"Install Date"', '"MRC"', '"PON"', '"Ref"', '"Region"', '"Comment"', '"Status"',
]
VENDORS = ["BellSouth", "Alltel", "Sprint", "AT&T", "Qwest", "Verizon", "DUKE NET", "SBC",
           "Windstream ILEC", "SHO ME TECHNOLOGIES"]


def _assemble(lines, target_size, pad_from):
    """Join token lists with CRLF, padding the last token of lines[pad_from:]."""
    base = sum(len(",".join(t).encode("utf-8")) + 2 for t in lines)
    padded = lines[pad_from:]
    deficit = target_size - base
    assert deficit >= 0, f"rows too long for {target_size} bytes (need {base})"
    per, extra = divmod(deficit, len(padded))
    for i, tokens in enumerate(padded):
        tokens[-1] += "z" * (per + (1 if i < extra else 0))
    data = "".join(",".join(t) + "\r\n" for t in lines).encode("utf-8")
    assert len(data) == target_size
    return data


def circuits_row(rng, order_id):
    vendor = rng.choice(VENDORS)
    circuit = rng.choice([
        f"DHEC/{rng.randint(100000, 999999)}//ATI",
        f"PL{rng.randint(100000, 999999)}",
        f"WO/HCGS/{rng.randint(100000, 999999)}/000/AEN",
        f"DHEC/{rng.randint(100000, 999999)}; DZEC",
    ])
    month, day = rng.randint(1, 12), rng.randint(1, 28)
    ordered = f"{month}/{day}/2008 0:00:00" if rng.random() < 0.8 else ""
    mrc = rng.choice([f"${rng.randint(0, 2000)}.{rng.randint(0, 99):02d}",
                      f"(${rng.randint(1, 2000)}.00)", ""])
    comment = rng.choice(['"needs FOC, call back"', '"said ""ok"""', "", "n/a"])
    return [
        str(order_id), str(order_id + 20000), f'"{vendor}"', f'"{circuit}"', ordered,
        rng.choice(["", f"{month}/{day}/08"]), mrc, f'"{rng.randint(1000, 9999)}-WS"',
        str(rng.randint(0, 9)), "NC", comment, "A",
    ]


def circuits_file(n_rows=7958, target_size=794270, seed=1):
    """Headered 12-column file; default size matches the logged 794,270 bytes."""
    rng = random.Random(seed)
    lines = [list(CIRCUITS_HEADER)] + [circuits_row(rng, 5895 + i) for i in range(n_rows)]
    return _assemble(lines, target_size, pad_from=1)


def cdr_file(n_rows=564, n_cols=48, target_size=164173, seed=2):
    """Headerless call-record file; the first field of every row is numeric."""
    rng = random.Random(seed)
    lines = []
    for i in range(n_rows):
        tokens = [str(170614000000 + i)]
        for c in range(1, n_cols - 1):
            kind = c % 6
            if kind == 0:
                tokens.append(str(rng.randint(0, 999)))
            elif kind == 1:
                tokens.append(f'"U{rng.randint(1, 99)}"')
            elif kind == 2:
                tokens.append("")
            elif kind == 3:
                tokens.append(rng.choice(["IN", "OUT", '"a,b"']))
            elif kind == 4:
                tokens.append(f"{rng.randint(0, 59)}")
            else:
                tokens.append("x")
        tokens.append("E")
        lines.append(tokens)
    return _assemble(lines, target_size, pad_from=0)


def plain_rows_file(n_rows, n_cols=10, seed=3, header=True):
    """Quoted and unquoted text rows for volume tests."""
    rng = random.Random(seed)
    out = []
    if header:
        out.append(",".join(f'"Column {c}"' for c in range(1, n_cols + 1)) + "\r\n")
    vendors = [f'"{v}"' for v in VENDORS]
    for i in range(n_rows):
        cells = [str(i), rng.choice(vendors), f'"DHEC/{i % 999983}//ATI"', "7/24/2008 0:00:00", "",
                 f"(${i % 2000}.00)", '"NC, east"', "note", str(i % 7), "Y"]
        out.append(",".join(cells[:n_cols] + ["x"] * (n_cols - len(cells))) + "\r\n")
    return "".join(out).encode("utf-8")
