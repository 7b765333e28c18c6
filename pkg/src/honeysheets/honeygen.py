"""Fabricates believable fake payroll content and assembles decoy sheets.

Account numbers are checksum-valid so they survive a casual plausibility
check, but every one of them is built on a fictitious bank identifier, so
none can map to a real account. The deny-prefix list is a second guard:
generation refuses to emit an account body that starts like a real
institution's.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import names
from .errors import ConfigMismatch, DenyPrefixCollision, UnsupportedCountry
from .honeylink import HoneyLink
from .sheetstore import Cell, CellFormat, HoneySheet

# BBAN length (total IBAN length minus the 4-char country+check prefix).
IBAN_BBAN_LENGTHS = {"GB": 18, "DE": 18, "FR": 23}

# Believable but unassigned institution identifiers, one per country.
FICTITIOUS_BANK_IDS = {"GB": "NNBK", "DE": "95959595", "FR": "39990"}

# Institution prefixes a generated BBAN must never start with.
DEFAULT_DENY_PREFIXES = (
    "BARC", "LOYD", "NWBK", "HBUK", "MIDL", "RBOS", "ABBY", "BUKB",
    "10070000", "37040044", "50010517", "20030000",
    "30002", "30004", "20041", "30006",
)

SHARE_LINK_BASE = "https://sheets.example.org/d"

HEADER_FORMAT = CellFormat(font_size=11, background_color=(239, 239, 239))
LINK_FORMAT = CellFormat(text_color=(17, 85, 204))

PAY_MIN_UNITS = 1500
PAY_MAX_UNITS = 9500


@dataclass(frozen=True)
class PersonRecord:
    full_name: str
    role: str
    monthly_pay: int  # currency minor units

    def __post_init__(self) -> None:
        if not self.full_name:
            raise ValueError("full_name must be non-empty")
        if self.monthly_pay <= 0:
            raise ValueError(f"monthly_pay must be positive, got {self.monthly_pay}")


@dataclass(frozen=True)
class Iban:
    country_code: str
    check_digits: str
    bban: str

    @property
    def text(self) -> str:
        return f"{self.country_code}{self.check_digits}{self.bban}"

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SortCode:
    digits: str

    def __post_init__(self) -> None:
        if len(self.digits) != 6 or not self.digits.isdigit():
            raise ValueError(f"sort code needs exactly 6 digits, got {self.digits!r}")

    @property
    def text(self) -> str:
        return f"{self.digits[0:2]}-{self.digits[2:4]}-{self.digits[4:6]}"

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SheetConfig:
    rows: int = 20
    link_slots: int = 9
    controlled_slots: int = 3
    rng_seed: int = 0
    iban_country: str = "GB"
    deny_bban_prefixes: tuple[str, ...] = DEFAULT_DENY_PREFIXES

    def __post_init__(self) -> None:
        if self.rows < 1:
            raise ValueError(f"rows must be >= 1, got {self.rows}")
        if self.link_slots < 0:
            raise ValueError(f"link_slots must be >= 0, got {self.link_slots}")
        if self.controlled_slots > self.link_slots:
            raise ValueError(
                f"controlled_slots {self.controlled_slots} exceeds link_slots {self.link_slots}"
            )


def _mod97_stream(rearranged: str) -> int:
    """Incremental MOD-97 over the letter-expanded numeric form."""
    rem = 0
    for ch in rearranged:
        if ch.isdigit():
            rem = (rem * 10 + ord(ch) - 48) % 97
        elif "A" <= ch <= "Z":
            rem = (rem * 100 + ord(ch) - 55) % 97
        else:
            raise ValueError(f"invalid IBAN character {ch!r}")
    return rem


def _check_digits_for(country_code: str, bban: str) -> str:
    value = _mod97_stream(bban + country_code + "00")
    return f"{98 - value:02d}"


def _digits(rng: random.Random, n: int) -> str:
    return "".join(str(rng.randrange(10)) for _ in range(n))


def _build_bban(country_code: str, rng: random.Random) -> str:
    bank = FICTITIOUS_BANK_IDS[country_code]
    if country_code == "GB":
        return bank + _digits(rng, 14)  # 6-digit sort code + 8-digit account
    if country_code == "DE":
        return bank + _digits(rng, 10)
    if country_code == "FR":
        return bank + _digits(rng, 5) + _digits(rng, 11) + _digits(rng, 2)
    raise UnsupportedCountry(country_code)


def generate_iban(
    country_code: str,
    rng: random.Random,
    deny_prefixes: tuple[str, ...] = DEFAULT_DENY_PREFIXES,
) -> Iban:
    """Draw a checksum-valid fake IBAN for the given country."""
    if country_code not in IBAN_BBAN_LENGTHS:
        raise UnsupportedCountry(f"no IBAN support for country {country_code!r}")
    bban = _build_bban(country_code, rng)
    assert len(bban) == IBAN_BBAN_LENGTHS[country_code]
    for prefix in deny_prefixes:
        if bban.startswith(prefix):
            raise DenyPrefixCollision(
                f"generated BBAN starts with deny-listed prefix {prefix!r}"
            )
    return Iban(
        country_code=country_code,
        check_digits=_check_digits_for(country_code, bban),
        bban=bban,
    )


def validate_iban(candidate: str) -> bool:
    """True iff the structure and the MOD-97 rule both hold.

    Only the supported country table is accepted; anything malformed
    returns False rather than raising.
    """
    if not isinstance(candidate, str) or len(candidate) < 4 or not candidate.isascii():
        return False
    country, check, bban = candidate[:2], candidate[2:4], candidate[4:]
    if country not in IBAN_BBAN_LENGTHS:
        return False
    if len(bban) != IBAN_BBAN_LENGTHS[country]:
        return False
    if not check.isdigit():
        return False
    if not all(ch.isdigit() or "A" <= ch <= "Z" for ch in bban):
        return False
    try:
        return _mod97_stream(bban + country + check) == 1
    except ValueError:
        return False


def generate_sort_code(rng: random.Random) -> SortCode:
    return SortCode(_digits(rng, 6))


def generate_person(rng: random.Random) -> PersonRecord:
    full_name = f"{rng.choice(names.GIVEN_NAMES)} {rng.choice(names.FAMILY_NAMES)}"
    role = rng.choice(names.ROLES)
    pay_units = rng.randint(PAY_MIN_UNITS, PAY_MAX_UNITS)
    return PersonRecord(full_name=full_name, role=role, monthly_pay=pay_units * 100)


def _draw_sheet_id(rng: random.Random) -> str:
    return "".join(rng.choice("0123456789abcdef") for _ in range(16))


def derive_sheet_id(rng_seed: int) -> str:
    """The sheet id build_honey_sheet will assign for this seed.

    The id is the first thing drawn from the sheet's generator, so links
    can be minted against it before the sheet itself exists.
    """
    return _draw_sheet_id(random.Random(rng_seed))


def build_honey_sheet(config: SheetConfig, links: list[HoneyLink]) -> HoneySheet:
    """Assemble a payroll-style decoy sheet with embedded honey links.

    Pure function of (config, links): the same inputs always serialize to
    identical bytes.
    """
    if len(links) != config.link_slots:
        raise ConfigMismatch(
            f"config expects {config.link_slots} links, got {len(links)}"
        )

    rng = random.Random(config.rng_seed)
    sheet_id = _draw_sheet_id(rng)
    share_link = f"{SHARE_LINK_BASE}/{sheet_id}/edit"

    link_cols = math.ceil(config.link_slots / config.rows) if config.link_slots else 0
    headers = ["Employee", "Role", "IBAN", "Sort code", "Monthly pay"]
    headers += ["Transfer" if i == 0 else f"Transfer {i + 1}" for i in range(link_cols)]
    widths = [160, 150, 230, 100, 120] + [220] * link_cols

    grid: list[list[Cell]] = [[Cell(h, HEADER_FORMAT) for h in headers]]
    for _ in range(config.rows):
        person = generate_person(rng)
        iban = generate_iban(config.iban_country, rng, config.deny_bban_prefixes)
        sort_code = generate_sort_code(rng)
        row = [
            Cell(person.full_name),
            Cell(person.role),
            Cell(iban.text),
            Cell(sort_code.text),
            Cell(f"£{person.monthly_pay // 100:,}"),
        ]
        row += [Cell()] * link_cols
        grid.append(row)

    for i, link in enumerate(links):
        row = 1 + i % config.rows
        col = 5 + i // config.rows
        grid[row][col] = Cell(link.short_url, LINK_FORMAT)

    return HoneySheet(
        sheet_id=sheet_id,
        grid=grid,
        column_widths=widths,
        share_link=share_link,
    )
