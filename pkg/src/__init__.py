# メタモルフィックカバレッジ (MC) 計測ツール
