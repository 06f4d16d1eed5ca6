from einglue.cli import main

raise SystemExit(main())
