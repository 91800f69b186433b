"""einstein-embed modules パッケージ"""
