from bolax.cli import app

app(prog_name="bolax")
