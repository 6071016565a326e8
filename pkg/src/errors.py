"""例外クラス定義

exit_code は CLI の終了コードにそのまま使う。
1: 入力エラー / 2: 契約違反 / 3: ポリシーフラグ
"""


class McError(Exception):
    """全エラーの基底クラス"""

    exit_code = 1


class InputError(McError):
    exit_code = 1


class ContractError(McError):
    exit_code = 2


class PolicyError(McError):
    exit_code = 3


class ParseError(InputError):
    """入力ファイルの構文エラー（行番号とトークン付き）"""

    def __init__(self, message, source=None, line=None, token=None):
        self.message = message
        self.source = source
        self.line = line
        self.token = token
        super().__init__(self._format())

    def _format(self):
        where = self.source or "<input>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        text = f"{where}: {self.message}"
        if self.token is not None:
            text += f" (token {self.token!r})"
        return text


class MalformedHunkHeader(ParseError):
    pass


class SchemaError(InputError):
    pass


class BadLength(InputError):
    pass


class InvalidSample(InputError):
    pass


class GranularityMismatch(ContractError):
    pass


class UnsupportedGranularity(ContractError):
    pass


class UniverseMismatch(ContractError):
    pass


class WrongGranularity(ContractError):
    pass


class EmptyUniverse(ContractError):
    pass


class EmptySide(ContractError):
    pass


class EmptySuite(ContractError):
    pass


class TooFewValues(ContractError):
    pass


class ZeroMean(ContractError):
    pass


class LengthMismatch(ContractError):
    pass


class ZeroVariance(ContractError):
    pass


class SizeTooLarge(ContractError):
    pass


class ArityMismatch(ContractError):
    pass


class NoMutants(ContractError):
    pass


class UnknownFixture(ContractError):
    pass


class MissingReturn(ContractError):
    pass


class InvalidBudget(ContractError):
    pass


class EmptyMetamorphicCoverage(PolicyError):
    pass


class TargetFailure(McError):
    """ターゲットアダプタの想定外の失敗。途中までの状態を保持する"""

    exit_code = 2

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
