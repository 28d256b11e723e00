"""Rule catalog: the HIPAA technical safeguards and their detection rules.

The catalog maps each safeguard of 45 CFR 164.312 to a named rule. A rule
carries sub-rules; each sub-rule carries detection patterns understood by the
pattern engine. A rule with no sub-rules exists in the catalog but cannot be
checked by scanning (one safeguard, emergency access procedure, has no code
signal). Catalogs can be loaded from a plain-text rules file; the built-in
catalog ships embedded in this module.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Literal

from .errors import (
    CatalogParseError,
    DuplicateIdError,
    EmptySubRuleError,
    PatternError,
)

Mode = Literal["any", "all"]
Polarity = Literal["evidence", "advisory"]

PROFILES = ("paper", "strict")

# Sub-rules downgraded to advisory under the strict profile: they detect
# mechanisms considered weak, so hits become findings rather than evidence.
STRICT_ADVISORY_SUB_RULES = frozenset(
    {"DES", "RC", "Message Digest", "SHA", "ECB", "BLOWFISH"})

# The default EN-DE import pattern lacks the dot before the class name. The
# strict profile keeps it and adds the well-formed variant alongside.
STRICT_EXTRA_EN_DE_PATTERN = "import java.util.Base64"


@dataclass(frozen=True)
class SafeguardRef:
    """One technical safeguard of 45 CFR 164.312."""

    cfr_reference: str
    safeguard_name: str
    description: str


@dataclass(frozen=True)
class SubRule:
    sub_rule_id: str
    mode: Mode
    polarity: Polarity
    patterns: tuple[str, ...]


@dataclass(frozen=True)
class SafeguardRule:
    rule_id: str
    safeguard: SafeguardRef
    sub_rules: tuple[SubRule, ...]

    @property
    def checkable(self) -> bool:
        return bool(self.sub_rules)


@dataclass(frozen=True)
class Catalog:
    """Immutable rule set, safe to share across workers."""

    rules: tuple[SafeguardRule, ...]
    recommendations: dict[str, str] = field(default_factory=dict)

    @cached_property
    def checksum(self) -> str:
        digest = hashlib.sha256(serialize_catalog(self).encode("utf-8"))
        return digest.hexdigest()

    def rule(self, rule_id: str) -> SafeguardRule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)


SAFEGUARDS: tuple[SafeguardRef, ...] = (
    SafeguardRef(
        "164.312(a)(1)", "Authorization",
        "Implement technological policies and procedures to restrict access "
        "to individuals or software programs that have been given access "
        "privileges for electronic information systems that maintain EPHI."),
    SafeguardRef(
        "164.312(a)(2)(i)", "Unique Id",
        "Assign a unique name or number to each patient in order to identify "
        "and monitor their identification."),
    SafeguardRef(
        "164.312(a)(2)(ii)", "Emergency EPHI Access",
        "Create and use processes for acquiring required digitally protected "
        "health information in an emergency."),
    SafeguardRef(
        "164.312(a)(2)(iii)", "Automatic Session timeout",
        "Implement software procedures that end a session after a certain "
        "period of inactivity."),
    SafeguardRef(
        "164.312(a)(2)(iv)", "EPHI Encryption and Decryption",
        "Implement a system for encrypting and decrypting EPHI."),
    SafeguardRef(
        "164.312(b)", "EPHI Audit Control",
        "Implement methods for recording and examining activities in "
        "information systems that use or include EPHI."),
    SafeguardRef(
        "164.312(c)(1)", "EPHI Data Integrity",
        "Implement regulations and procedures to prevent unauthorized "
        "manipulation or destruction of EPHI."),
    SafeguardRef(
        "164.312(c)(2)", "EPHI Integrity Verification",
        "Utilize technological tools to verify that electronically stored "
        "protected health information has not been tampered with or deleted "
        "without authorization."),
    SafeguardRef(
        "164.312(d)", "EPHI Authentication",
        "Establish processes to confirm that the individual or organization "
        "requesting access to EPHI is who is being identified."),
    SafeguardRef(
        "164.312(e)(1)", "EPHI Transmission Security",
        "Implement technological security measures to prevent unauthorized "
        "access to digitally protected health information that is being sent "
        "through a network of electronic communications."),
    SafeguardRef(
        "164.312(e)(2)(i)", "EPHI Transmission Integrity",
        "Implement security measures to guarantee that electronically "
        "transmitted protected health information is not improperly altered "
        "up to disposal without being noticed."),
    SafeguardRef(
        "164.312(e)(2)(ii)", "Appropriate EPHI Encryption",
        "Implement a mechanism to encrypt EPHI whenever deemed appropriate."),
)

_SAFEGUARDS_BY_REF = {s.cfr_reference: s for s in SAFEGUARDS}


def safeguard_for_reference(cfr_reference: str) -> SafeguardRef | None:
    return _SAFEGUARDS_BY_REF.get(cfr_reference)


_RECOMMEND_AUDIT = (
    "Implement audit controls to enable thorough investigation of every "
    "incident.")
_RECOMMEND_SSL = "When integrating external APIs, be sure to use SSL."
_RECOMMEND_ACCESS = (
    "Use appropriate access control methods to ensure that only authorized "
    "individuals can access sensitive EPHI.")
_RECOMMEND_CRYPTO = "Use cutting-edge encryption and decryption mechanisms"

# Rules-file text of the built-in catalog. Rule order follows the CFR
# references. Sub-rule and pattern text is deliberate, typos included;
# changing a single character changes the catalog checksum.
BUILTIN_RULES_TEXT = r'''# Built-in detection rules for the HIPAA technical safeguards.
[rule] Authorization ref=164.312(a)(1)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "Authorization Control" mode=any polarity=evidence
pattern: AuthorizationException
[subrule] "Access Control" mode=any polarity=evidence
pattern: IllegalAccessException
[rule] Unique_Id ref=164.312(a)(2)(i)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "PK" mode=any polarity=evidence
pattern: PRIMARY KEY
[rule] Emergency_EPHI_Access ref=164.312(a)(2)(ii)
[rule] Automatic_Session_Timeout ref=164.312(a)(2)(iii)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "Inactivity" mode=any polarity=evidence
pattern: public void onUserInteraction()
pattern: .reset()
pattern: .clear()
pattern: .commit()
[rule] EPHI_encryption_decryption ref=164.312(a)(2)(iv)
recommend: Use cutting-edge encryption and decryption mechanisms
[subrule] "EN-DE" mode=any polarity=evidence
pattern: import java.util Base64
[subrule] "AES" mode=any polarity=evidence
pattern: import org.springframework.security.crypto
pattern: import java.security.Security;
pattern: Cipher.getInstance("AES/ECB/
pattern: Cipher.getInstance("AES")
pattern: Cipher.getInstance(AES_MODE
pattern: new SecretKeySpec(keyBytes, "AES"
pattern: Cipher.getInstance("AES/CBC/
[subrule] "DES" mode=any polarity=evidence
pattern: Cipher.getInstance(.*DES
pattern: Cipher.getInstance(.*des
[subrule] "RSA" mode=any polarity=evidence
pattern: Cipher.getInstance("RSA
[subrule] "BLOWFISH" mode=any polarity=evidence
pattern: .getInstance(.*BLOWFISH
[subrule] "RC" mode=any polarity=evidence
pattern: .getInstance(.*RC2
pattern: .getInstance(.*rc4
pattern: .getInstance(.*RC4
pattern: .getInstance(.*rc2
[subrule] "Message Digest" mode=any polarity=evidence
pattern: MessageDigest
pattern: import java.security.MessageDigest;
pattern: .getInstance(.*MD5
pattern: .getInstance(.*md5
pattern: DigestUtils.md5(
pattern: import org.apache.commons.codec.digest.DigestUtils;
[subrule] "SHA" mode=any polarity=evidence
pattern: .getInstance(.*SHA-1
pattern: .getInstance(.*SHA1
pattern: DigestUtils.sha(
[subrule] "ECB" mode=any polarity=evidence
pattern: Cipher.getInstance(\s*"\s*AES/ECB
[subrule] "HMAC" mode=any polarity=evidence
pattern: import org.apache.commons.codec.digest.HmacAlgorithms;
pattern: import org.apache.commons.codec.digest.HmacUtils;
[rule] EPHI_Audit_Control ref=164.312(b)
recommend: Implement audit controls to enable thorough investigation of every incident.
[subrule] "Audit" mode=any polarity=evidence
pattern: AppOpsManager.OnOpNotedCallback
[rule] EPHI_data_integrity ref=164.312(c)(1)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "authorization_exception" mode=any polarity=evidence
pattern: AuthorizationException
[subrule] "illegal_access" mode=any polarity=evidence
pattern: IllegalAccessException
[subrule] "user_authentication_oauth" mode=any polarity=evidence
pattern: android.accounts.AccountManager
pattern: AccountManager.get(
[subrule] "user_authentication_firebase" mode=any polarity=evidence
pattern: FirebaseUser
pattern: sendFirebasePropertyRegisteredUser
pattern: FirebaseUserPropertiesSender
pattern: com.google.firebase:firebase-auth
pattern: FirebaseAuth
[rule] EPHI_integrity_verification ref=164.312(c)(2)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "authorization_exception_on_destroy" mode=any polarity=evidence
pattern: AuthorizationException
[subrule] "illegal_destruction_restriction" mode=any polarity=evidence
pattern: IllegalAccessException
[rule] EPHI_authentication ref=164.312(d)
recommend: Use appropriate access control methods to ensure that only authorized individuals can access sensitive EPHI.
[subrule] "FireBaseAuth" mode=any polarity=evidence
pattern: FirebaseUser
pattern: sendFirebasePropertyRegisteredUser
pattern: FirebaseUserPropertiesSender
pattern: com.google.firebase:firebase-auth
pattern: FirebaseAuth
[subrule] "aAuth" mode=any polarity=evidence
pattern: android.accounts.AccountManager
pattern: AccountManager.get(
pattern: .currentUser
[rule] EPHI_Transmission_Security ref=164.312(e)(1)
recommend: When integrating external APIs, be sure to use SSL.
[subrule] "API" mode=any polarity=evidence
pattern: addRequestProperty("Authorization
[subrule] "PKIX" mode=any polarity=evidence
pattern: PKIXRevocationChecker
[subrule] "TRANS-Data" mode=any polarity=evidence
pattern: HttpsURLConnection new
[rule] EPHI_Transmission_integrity ref=164.312(e)(2)(i)
recommend: When integrating external APIs, be sure to use SSL.
[subrule] "TRANS-NET" mode=any polarity=evidence
pattern: javax.net.ssl.TrustManager
pattern: TrustManagerFactory.getInstance(
[rule] Appropriate_EPHI_Encryption ref=164.312(e)(2)(ii)
recommend: Use cutting-edge encryption and decryption mechanisms
[subrule] "DE" mode=any polarity=evidence
pattern: android.util.Base64
pattern: .decodeToString
pattern: .decode
[subrule] "EN" mode=any polarity=evidence
pattern: android.util.Base64
pattern: .encodeToString
pattern: .encode
[subrule] "ENCRYPT" mode=any polarity=evidence
pattern: io.realm.Realm
pattern: .encryptionKey(
[subrule] "Chiper" mode=any polarity=evidence
pattern: net.sqlcipher.
pattern: AS encrypted KEY
'''

_RULE_RE = re.compile(r"^\[rule\]\s+(\S+)\s+ref=(\S+)$")
_SUBRULE_RE = re.compile(
    r'^\[subrule\]\s+"([^"]+)"'
    r"(?:\s+mode=(any|all))?(?:\s+polarity=(evidence|advisory))?$")


def load_catalog(source_text: str) -> Catalog:
    """Parse rules-file text into a Catalog.

    Directives are one per line: ``[rule] <id> ref=<cfr>``, ``[subrule]
    "<id>" mode=<any|all> polarity=<evidence|advisory>`` (mode and polarity
    optional, defaulting to any and evidence), ``pattern: <text>``, and
    ``recommend: <text>``. Lines whose first non-blank character is ``#`` are
    comments. A repeated ``recommend:`` inside one rule replaces the earlier
    text. Raises CatalogParseError (with the offending line number),
    DuplicateIdError, or EmptySubRuleError.
    """
    rules: list[SafeguardRule] = []
    recommendations: dict[str, str] = {}
    rule_ids: set[str] = set()

    cur_rule_id: str | None = None
    cur_ref: str | None = None
    cur_subs: list[SubRule] = []
    cur_sub_ids: set[str] = set()
    cur_sub: tuple[str, Mode, Polarity] | None = None
    cur_patterns: list[str] = []

    def close_sub() -> None:
        nonlocal cur_sub
        if cur_sub is None:
            return
        sub_id, mode, polarity = cur_sub
        if not cur_patterns:
            raise EmptySubRuleError(
                f"sub-rule {sub_id!r} of rule {cur_rule_id!r} has no patterns")
        cur_subs.append(SubRule(sub_id, mode, polarity, tuple(cur_patterns)))
        cur_patterns.clear()
        cur_sub = None

    def close_rule() -> None:
        nonlocal cur_rule_id, cur_ref
        if cur_rule_id is None:
            return
        close_sub()
        safeguard = safeguard_for_reference(cur_ref or "")
        if safeguard is None:
            safeguard = SafeguardRef(cur_ref or "", cur_rule_id, "")
        rules.append(SafeguardRule(cur_rule_id, safeguard, tuple(cur_subs)))
        cur_subs.clear()
        cur_sub_ids.clear()
        cur_rule_id = None
        cur_ref = None

    for line_no, raw_line in enumerate(source_text.splitlines(), start=1):
        line = raw_line.rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if line.startswith("[rule]"):
            m = _RULE_RE.match(line)
            if m is None:
                raise CatalogParseError("malformed [rule] directive", line_no)
            close_rule()
            rule_id, ref = m.group(1), m.group(2)
            if rule_id in rule_ids:
                raise DuplicateIdError(f"duplicate rule id {rule_id!r}")
            rule_ids.add(rule_id)
            cur_rule_id, cur_ref = rule_id, ref
        elif line.startswith("[subrule]"):
            if cur_rule_id is None:
                raise CatalogParseError(
                    "[subrule] before any [rule]", line_no)
            m = _SUBRULE_RE.match(line)
            if m is None:
                raise CatalogParseError(
                    "malformed [subrule] directive", line_no)
            close_sub()
            sub_id = m.group(1)
            if sub_id in cur_sub_ids:
                raise DuplicateIdError(
                    f"duplicate sub-rule id {sub_id!r} in rule {cur_rule_id!r}")
            cur_sub_ids.add(sub_id)
            cur_sub = (sub_id, m.group(2) or "any", m.group(3) or "evidence")
        elif line.startswith("pattern:"):
            if cur_sub is None:
                raise CatalogParseError(
                    "pattern outside any [subrule]", line_no)
            text = line[len("pattern:"):]
            if text.startswith(" "):
                text = text[1:]
            cur_patterns.append(text)
        elif line.startswith("recommend:"):
            if cur_rule_id is None:
                raise CatalogParseError(
                    "recommend outside any [rule]", line_no)
            text = line[len("recommend:"):]
            if text.startswith(" "):
                text = text[1:]
            recommendations[cur_rule_id] = text
        else:
            raise CatalogParseError(f"unrecognized line: {stripped!r}", line_no)
    close_rule()
    return Catalog(tuple(rules), recommendations)


def serialize_catalog(catalog: Catalog) -> str:
    """Render a Catalog to canonical rules-file text.

    The output parses back to an equal catalog, and identical catalogs
    serialize to identical text; the checksum is the SHA-256 of this form.
    """
    lines: list[str] = []
    for rule in catalog.rules:
        lines.append(
            f"[rule] {rule.rule_id} ref={rule.safeguard.cfr_reference}")
        recommendation = catalog.recommendations.get(rule.rule_id)
        if recommendation is not None:
            lines.append(f"recommend: {recommendation}")
        for sub in rule.sub_rules:
            lines.append(
                f'[subrule] "{sub.sub_rule_id}" '
                f"mode={sub.mode} polarity={sub.polarity}")
            for pattern in sub.patterns:
                lines.append(f"pattern: {pattern}")
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def builtin_catalog(profile: str = "paper") -> Catalog:
    """The embedded catalog. ``profile`` selects pattern strictness.

    The default profile reproduces the transcribed rule set byte for byte.
    The strict profile downgrades weak-mechanism sub-rules to advisory and
    adds the well-formed Base64 import to EN-DE.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    base = load_catalog(BUILTIN_RULES_TEXT)
    if profile == "paper":
        return base
    rules: list[SafeguardRule] = []
    for rule in base.rules:
        if rule.rule_id != "EPHI_encryption_decryption":
            rules.append(rule)
            continue
        subs: list[SubRule] = []
        for sub in rule.sub_rules:
            polarity: Polarity = sub.polarity
            patterns = sub.patterns
            if sub.sub_rule_id in STRICT_ADVISORY_SUB_RULES:
                polarity = "advisory"
            if sub.sub_rule_id == "EN-DE":
                patterns = patterns + (STRICT_EXTRA_EN_DE_PATTERN,)
            subs.append(SubRule(sub.sub_rule_id, sub.mode, polarity, patterns))
        rules.append(SafeguardRule(rule.rule_id, rule.safeguard, tuple(subs)))
    return Catalog(tuple(rules), dict(base.recommendations))


@dataclass(frozen=True)
class Issue:
    """One problem found by validate_catalog."""

    code: str
    message: str
    rule_id: str
    sub_rule_id: str | None = None
    pattern_index: int | None = None


_CFR_SHAPE = re.compile(r"^164\.312\([a-z]\)(\([a-z0-9]+\))*$")


def validate_catalog(catalog: Catalog) -> list[Issue]:
    """Check references and pattern compilability; returns found issues."""
    from .patterns import compile_pattern

    issues: list[Issue] = []
    for rule in catalog.rules:
        ref = rule.safeguard.cfr_reference
        if not _CFR_SHAPE.match(ref):
            issues.append(Issue(
                "BadReference",
                f"reference {ref!r} does not name a technical safeguard",
                rule.rule_id))
        for sub in rule.sub_rules:
            for i, raw in enumerate(sub.patterns):
                try:
                    compile_pattern(raw, (rule.rule_id, sub.sub_rule_id, i))
                except PatternError as exc:
                    code = ("EmptyPattern" if not raw.rstrip() else "BadPattern")
                    issues.append(Issue(
                        code, str(exc), rule.rule_id, sub.sub_rule_id, i))
    return issues


def catalog_counts(catalog: Catalog) -> dict[str, int]:
    """Totals used by the CLI rules listing."""
    return {
        "safeguards": len(catalog.rules),
        "checkable_rules": sum(1 for r in catalog.rules if r.checkable),
        "sub_rules": sum(len(r.sub_rules) for r in catalog.rules),
        "patterns": sum(
            len(s.patterns) for r in catalog.rules for s in r.sub_rules),
    }
