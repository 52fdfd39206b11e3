"""Front end for the analysed C dialect: lexer, parser, type checker, harness."""
